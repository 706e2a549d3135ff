#pragma once

#include "mapg/best_response.hpp"
#include "mapg/dynamics.hpp"
#include "mapg/evaluation.hpp"
#include "mapg/game.hpp"
#include "mapg/game_zoo.hpp"
#include "mapg/harness.hpp"
#include "mapg/potentials.hpp"
#include "mapg/serialization.hpp"
#include "mapg/version.hpp"
