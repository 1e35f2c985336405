#pragma once

#include "deepparaphrase/checkpoint.hpp"
#include "deepparaphrase/corpus.hpp"
#include "deepparaphrase/embeddings.hpp"
#include "deepparaphrase/encoder.hpp"
#include "deepparaphrase/errors.hpp"
#include "deepparaphrase/gradcheck.hpp"
#include "deepparaphrase/lstm.hpp"
#include "deepparaphrase/metrics.hpp"
#include "deepparaphrase/model.hpp"
#include "deepparaphrase/ops.hpp"
#include "deepparaphrase/optim.hpp"
#include "deepparaphrase/params.hpp"
#include "deepparaphrase/rng.hpp"
#include "deepparaphrase/stat_features.hpp"
#include "deepparaphrase/tensor.hpp"
#include "deepparaphrase/tokenize.hpp"
#include "deepparaphrase/trainer.hpp"
#include "deepparaphrase/wordsim.hpp"
