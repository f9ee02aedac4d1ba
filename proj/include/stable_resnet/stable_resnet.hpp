#pragma once

#include "dataset.hpp"
#include "dual.hpp"
#include "error.hpp"
#include "gp.hpp"
#include "grad_moments.hpp"
#include "gram.hpp"
#include "kernels.hpp"
#include "limits.hpp"
#include "mc.hpp"
#include "pacbayes.hpp"
#include "scaling.hpp"
#include "version.hpp"
