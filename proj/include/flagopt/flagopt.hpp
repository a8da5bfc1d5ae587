#pragma once

#include "flagopt/matcore.hpp"
#include "flagopt/grassmann.hpp"
#include "flagopt/flag.hpp"
#include "flagopt/objectives.hpp"
#include "flagopt/optim.hpp"
#include "flagopt/io.hpp"
#include "flagopt/bench.hpp"
