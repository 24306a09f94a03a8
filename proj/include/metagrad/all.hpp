#pragma once

#include "baselines.hpp"
#include "core.hpp"
#include "environments.hpp"
#include "experiment.hpp"
#include "harness.hpp"
#include "master.hpp"
#include "metagrad.hpp"
#include "online.hpp"
#include "rng.hpp"
#include "slave.hpp"
#include "suites.hpp"
#include "surrogate.hpp"
