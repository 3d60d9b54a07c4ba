#pragma once

#include "colflux/errors.hpp"
#include "colflux/numerics.hpp"
#include "colflux/model.hpp"
#include "colflux/transport.hpp"
#include "colflux/spectral.hpp"
#include "colflux/observe.hpp"
#include "colflux/prior.hpp"
#include "colflux/posterior.hpp"
#include "colflux/assimilate.hpp"
#include "colflux/io.hpp"
#include "colflux/config.hpp"
#include "colflux/scenarios.hpp"
