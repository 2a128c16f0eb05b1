#pragma once

#include "corpus.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "examples.hpp"
#include "fixtures.hpp"
#include "lexicon.hpp"
#include "model.hpp"
#include "objectives.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"
#include "train.hpp"
#include "util.hpp"
