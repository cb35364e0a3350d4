#include <gtest/gtest.h>

#include "litfield/atlas.hpp"
#include "litfield/classify.hpp"
#include "litfield/corpus.hpp"
#include "litfield/embed_io.hpp"
#include "litfield/evaluate.hpp"
#include "litfield/metrics.hpp"
#include "litfield/provider.hpp"
#include "litfield/regress.hpp"

TEST(Smoke, Compiles) { SUCCEED(); }
