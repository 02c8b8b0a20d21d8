#pragma once

#include "weakmeas/errors.hpp"
#include "weakmeas/experiments.hpp"
#include "weakmeas/io.hpp"
#include "weakmeas/parallel.hpp"
#include "weakmeas/povm.hpp"
#include "weakmeas/quadrature.hpp"
#include "weakmeas/qubit.hpp"
#include "weakmeas/rng.hpp"
#include "weakmeas/sde.hpp"
#include "weakmeas/sequence.hpp"
#include "weakmeas/stats.hpp"
#include "weakmeas/summary.hpp"
#include "weakmeas/vec3.hpp"
#include "weakmeas/version.hpp"
