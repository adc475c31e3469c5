#pragma once

#include "bm25.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "ranker_eval.hpp"
#include "reranker.hpp"
#include "span_oracle.hpp"
#include "supervision.hpp"
#include "synth.hpp"
#include "text.hpp"
