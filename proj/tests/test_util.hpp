#pragma once

#include "unijac/verify.hpp"

namespace unijac::testing {

using sampling::fd_wirtinger;
using sampling::random_hermitian;
using sampling::random_matrix;
using sampling::random_problem;
using sampling::random_tensor;
using sampling::random_tuple;

}  // namespace unijac::testing
