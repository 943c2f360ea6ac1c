// Umbrella header: the whole flowgauntlet library.
#pragma once

#include <flowgauntlet/core.hpp>
#include <flowgauntlet/rng.hpp>
#include <flowgauntlet/flowdata.hpp>
#include <flowgauntlet/metrics.hpp>
#include <flowgauntlet/featselect.hpp>
#include <flowgauntlet/models/model.hpp>
#include <flowgauntlet/hyperopt.hpp>
#include <flowgauntlet/advcraft.hpp>
#include <flowgauntlet/conformal.hpp>
#include <flowgauntlet/pipeline.hpp>
#include <flowgauntlet/config.hpp>
