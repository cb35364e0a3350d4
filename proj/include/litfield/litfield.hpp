#pragma once

#include "litfield/atlas.hpp"
#include "litfield/classify.hpp"
#include "litfield/config.hpp"
#include "litfield/corpus.hpp"
#include "litfield/date.hpp"
#include "litfield/embed.hpp"
#include "litfield/embed_io.hpp"
#include "litfield/error.hpp"
#include "litfield/evaluate.hpp"
#include "litfield/metrics.hpp"
#include "litfield/neighbors.hpp"
#include "litfield/pipeline.hpp"
#include "litfield/provider.hpp"
#include "litfield/random.hpp"
#include "litfield/regress.hpp"
