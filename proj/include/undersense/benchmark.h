// Copyright 2026 The Undersense Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Synthetic reading-comprehension benchmark for the toy scorer.
//
// Each context is a handful of event sentences ("In 1204 , Otto Brandt
// restored the abbey in Verona .") plus filler. Questions ask for one slot
// of one event and repeat the other slots as cues. Besides answerable
// questions there are near-miss unanswerable ones, whose cues mix two
// events of the same context, and unrelated unanswerable ones about events
// that are not in the context.

#ifndef UNDERSENSE_BENCHMARK_H_
#define UNDERSENSE_BENCHMARK_H_

#include <cstdint>
#include <vector>

#include "undersense/lexicon.h"
#include "undersense/tagged_text.h"

namespace undersense {

struct BenchmarkOptions {
  size_t train = 600;
  size_t dev = 200;
  size_t test = 400;
  uint64_t seed = 7;
  // Fractions of near-miss and unrelated unanswerable questions.
  double near_miss_fraction = 0.15;
  double unrelated_fraction = 0.15;
  // Fraction of answerable questions allowed to use words that are not
  // near the answer.
  double uncovered_fraction = 0.05;
};

struct Benchmark {
  std::vector<Sample> train;
  std::vector<Sample> dev;
  std::vector<Sample> test;
  // Tagged sentences covering the whole vocabulary, for building lexicons.
  std::vector<TaggedCorpusRecord> corpus;
};

Benchmark MakeBenchmark(const BenchmarkOptions& options);

}  // namespace undersense

#endif  // UNDERSENSE_BENCHMARK_H_
