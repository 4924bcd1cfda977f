#ifndef CASSIFUSE_CASSIFUSE_HPP
#define CASSIFUSE_CASSIFUSE_HPP

#include "cassifuse/aperture.hpp"
#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/evaluation.hpp"
#include "cassifuse/fusion.hpp"
#include "cassifuse/io.hpp"
#include "cassifuse/linear_map.hpp"
#include "cassifuse/mlp.hpp"
#include "cassifuse/pipeline.hpp"
#include "cassifuse/random.hpp"
#include "cassifuse/regularizers.hpp"
#include "cassifuse/sensing.hpp"
#include "cassifuse/solver.hpp"
#include "cassifuse/sparse.hpp"
#include "cassifuse/synthetic.hpp"

#endif  // CASSIFUSE_CASSIFUSE_HPP
