#pragma once

#include "rng.hpp"
#include "errors.hpp"
#include "hypergraph.hpp"
#include "core.hpp"
#include "dimer.hpp"
#include "cavity.hpp"
#include "spectrum.hpp"
#include "entropy.hpp"
#include "instance_io.hpp"
