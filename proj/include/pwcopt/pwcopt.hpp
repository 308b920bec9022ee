#pragma once

#include "pwcopt/error.hpp"
#include "pwcopt/dynamics.hpp"
#include "pwcopt/pmp.hpp"
#include "pwcopt/parallel.hpp"
#include "pwcopt/analytic.hpp"
#include "pwcopt/shooting.hpp"
#include "pwcopt/grape.hpp"
#include "pwcopt/fit.hpp"
