#pragma once

#include "mmab/core.hpp"
#include "mmab/potentials.hpp"
#include "mmab/twostage.hpp"
#include "mmab/environments.hpp"
#include "mmab/graphs.hpp"
#include "mmab/bai.hpp"
#include "mmab/theory.hpp"
#include "mmab/harness.hpp"
