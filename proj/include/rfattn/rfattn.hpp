#pragma once

#include "rfattn/attention.hpp"
#include "rfattn/bench.hpp"
#include "rfattn/errors.hpp"
#include "rfattn/feature_map.hpp"
#include "rfattn/fwht.hpp"
#include "rfattn/halton.hpp"
#include "rfattn/kernels.hpp"
#include "rfattn/matrix.hpp"
#include "rfattn/orthogonal.hpp"
#include "rfattn/rng.hpp"
#include "rfattn/special.hpp"
#include "rfattn/weight_matrix.hpp"
