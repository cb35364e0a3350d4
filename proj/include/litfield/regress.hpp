#pragma once

#include "litfield/regress/dataset.hpp"
#include "litfield/regress/diagnostics.hpp"
#include "litfield/regress/model.hpp"
#include "litfield/regress/sampler.hpp"
#include "litfield/regress/variants.hpp"
