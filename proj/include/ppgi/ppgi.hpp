#ifndef PPGI_PPGI_HPP
#define PPGI_PPGI_HPP

#include "config.hpp"
#include "core.hpp"
#include "csv.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "ingest.hpp"
#include "log.hpp"
#include "manifold.hpp"
#include "operators.hpp"
#include "pipeline.hpp"
#include "resonator.hpp"
#include "rng.hpp"
#include "skin.hpp"
#include "spectral.hpp"
#include "synth.hpp"
#include "types.hpp"

#endif // PPGI_PPGI_HPP
