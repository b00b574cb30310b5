#pragma once

#include "coxstaff/arrival_model.hpp"
#include "coxstaff/errors.hpp"
#include "coxstaff/estimation.hpp"
#include "coxstaff/experiments.hpp"
#include "coxstaff/infinite_server.hpp"
#include "coxstaff/io.hpp"
#include "coxstaff/rng.hpp"
#include "coxstaff/simulator.hpp"
#include "coxstaff/staffing.hpp"
