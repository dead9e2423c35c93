#pragma once

#include "mlw/baselines.hpp"
#include "mlw/errors.hpp"
#include "mlw/inference.hpp"
#include "mlw/io.hpp"
#include "mlw/mc.hpp"
#include "mlw/model.hpp"
#include "mlw/numeric.hpp"
#include "mlw/series.hpp"
#include "mlw/sigma.hpp"
#include "mlw/simulate.hpp"
#include "mlw/spectra.hpp"
#include "mlw/whittle.hpp"
