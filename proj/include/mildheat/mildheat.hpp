#pragma once

#include "mildheat/errors.hpp"
#include "mildheat/random.hpp"
#include "mildheat/numfmt.hpp"
#include "mildheat/spectral_domain.hpp"
#include "mildheat/fractional_calculus.hpp"
#include "mildheat/noise_fields.hpp"
#include "mildheat/mild_solver.hpp"
#include "mildheat/convergence_lab.hpp"
#include "mildheat/cli_io.hpp"
