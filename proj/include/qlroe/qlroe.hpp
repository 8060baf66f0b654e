#ifndef QLROE_QLROE_HPP
#define QLROE_QLROE_HPP

#include "qlroe/approximation.hpp"
#include "qlroe/corpus.hpp"
#include "qlroe/cutdown.hpp"
#include "qlroe/decomposition.hpp"
#include "qlroe/error.hpp"
#include "qlroe/locality.hpp"
#include "qlroe/lp_operator.hpp"
#include "qlroe/rng.hpp"
#include "qlroe/space.hpp"

#endif  // QLROE_QLROE_HPP
