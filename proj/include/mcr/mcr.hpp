#pragma once

#include "mcr/errors.hpp"
#include "mcr/feature_em.hpp"
#include "mcr/feature_pipeline.hpp"
#include "mcr/final_fit.hpp"
#include "mcr/metrics.hpp"
#include "mcr/mixreg_em.hpp"
#include "mcr/model_select.hpp"
#include "mcr/numerics.hpp"
#include "mcr/pipeline.hpp"
#include "mcr/posterior.hpp"
#include "mcr/random.hpp"
#include "mcr/simgen.hpp"
#include "mcr/types.hpp"
