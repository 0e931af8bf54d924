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

#include "undersense/benchmark.h"

#include <algorithm>
#include <array>
#include <set>
#include <string>

#include "undersense/rng.h"
#include "undersense/toy_model.h"
#include "undersense/utf8.h"

namespace undersense {

namespace {

const std::vector<std::string>& People() {
  static const std::vector<std::string> kPeople = {
      "Otto Brandt", "Rollo", "Matilda", "Duval", "Agnes", "Lorenzo",
      "Ingrid", "Novak", "Elena", "Hugo", "Beatrix", "Aldo", "Clara",
      "Magnus", "Sofia", "Pieter de Vries", "Ada", "Kasimir", "Isabel",
      "Anselm", "Greta", "Marco", "Ottoline", "Bruno", "Lucia", "Edmund",
      "Yara", "Felix", "Nadia", "Roderick", "Helga", "Emil", "Rosa",
      "Jonas", "Marta", "Victor", "Irene", "Oskar", "Lena", "Conrad"};
  return kPeople;
}

const std::vector<std::string>& Places() {
  static const std::vector<std::string> kPlaces = {
      "Italy", "Las Vegas", "Verona", "Normandy", "Sicily", "Bavaria",
      "New South Wales", "Lisbon", "Krak\xc3\xb3w", "Z\xc3\xbcrich",
      "S\xc3\xa3o Paulo", "Flanders", "Bruges", "Toledo", "Galway",
      "Ghent", "Porto", "Lyon", "Antwerp", "Utrecht", "Bergen", "Seville",
      "Genoa", "Dresden", "Tallinn", "Valencia", "Brittany", "Cornwall",
      "Saxony", "Lombardy", "Aragon", "Bohemia", "Provence", "Tuscany",
      "Andalusia", "Silesia", "Navarre", "Burgundy", "Castile", "Riga"};
  return kPlaces;
}

std::vector<std::string> Years() {
  std::vector<std::string> years;
  for (int i = 0; i < 40; ++i) years.push_back(std::to_string(1012 + 23 * i));
  return years;
}

const std::vector<std::string>& Nouns() {
  static const std::vector<std::string> kNouns = {
      "abbey", "bridge", "castle", "cathedral", "harbor", "library",
      "monastery", "palace", "fortress", "market", "mill", "school",
      "tower", "chapel", "hospital", "canal", "theater", "university",
      "observatory", "granary"};
  return kNouns;
}

const std::vector<std::string>& Verbs() {
  static const std::vector<std::string> kVerbs = {
      "built", "founded", "restored", "designed", "funded", "sold",
      "bought", "rebuilt", "expanded", "fortified", "inherited", "seized",
      "patronized", "dismantled", "renovated", "mortgaged"};
  return kVerbs;
}

const std::vector<std::string>& Adjectives() {
  static const std::vector<std::string> kAdjectives = {
      "old", "new", "great", "small", "royal", "famous", "ancient",
      "wooden", "northern", "southern"};
  return kAdjectives;
}

const std::vector<std::string>& Fillers() {
  static const std::vector<std::string> kFillers = {
      "Travellers often praised its mild weather .",
      "Trade along rivers grew steadily over following decades .",
      "Several chronicles describe this period at length .",
      "Local records from that time are incomplete .",
      "Surrounding villages supplied grain and timber .",
      "Pilgrims and merchants passed through every summer .",
      "Few letters from those years survive .",
      "Historians still debate its exact purpose .",
      "Winters there were often harsh and long .",
      "Many visitors later wrote about it .",
      "Its walls needed constant repair .",
      "Records mention several disputes over ownership ."};
  return kFillers;
}

struct Event {
  std::string person;
  std::string place;
  std::string year;
  std::string noun;
  std::string verb;
  std::string adjective;  // may be empty
};

enum class Slot { kPerson, kPlace, kYear, kNoun };

// A growing tagged text: tokens are joined by single spaces, punctuation
// attaches to the previous token.
class Builder {
 public:
  void Word(const std::string& text, const std::string& pos) {
    const bool attach = !text_.empty() && (text == "." || text == "," || text == "?");
    if (!text_.empty() && !attach) text_.push_back(' ');
    const size_t start = text_.size();
    text_ += text;
    tokens_.push_back({text, pos, start, text_.size()});
  }

  // Adds a (possibly multi-token) entity; returns its first character.
  size_t Entity(const std::string& text, const std::string& type,
                const std::string& pos) {
    const size_t first = tokens_.size();
    size_t start = 0;
    size_t begin = 0;
    bool first_token = true;
    while (begin <= text.size()) {
      size_t end = text.find(' ', begin);
      if (end == std::string::npos) end = text.size();
      Word(text.substr(begin, end - begin), pos);
      if (first_token) start = tokens_.back().char_start;
      first_token = false;
      begin = end + 1;
    }
    entities_.push_back({text, type, first, tokens_.size()});
    return start;
  }

  size_t Noun(const Event& e) {
    Word("the", "DT");
    if (!e.adjective.empty()) Word(e.adjective, "JJ");
    Word(e.noun, "NN");
    return tokens_.back().char_start;
  }

  void Raw(const std::string& sentence) {
    size_t begin = 0;
    while (begin < sentence.size()) {
      size_t end = sentence.find(' ', begin);
      if (end == std::string::npos) end = sentence.size();
      const std::string word = sentence.substr(begin, end - begin);
      // Context tags are never written out.
      const std::string pos = word == "." ? "." : "XX";
      Word(word, pos);
      begin = end + 1;
    }
  }

  const std::string& text() const { return text_; }
  const std::vector<TaggedToken>& tokens() const { return tokens_; }
  const std::vector<EntityMention>& entities() const { return entities_; }

 private:
  std::string text_;
  std::vector<TaggedToken> tokens_;
  std::vector<EntityMention> entities_;
};

// True when every question word that occurs in the context also occurs
// within kToyWindow words of the answer span [begin, end).
bool Covered(const std::string& context, size_t begin, size_t end,
             const std::string& question) {
  const std::vector<ToyToken> tokens = ToyTokenize(context);
  std::set<std::string> everywhere, near;
  size_t first = tokens.size(), last = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    everywhere.insert(tokens[i].lower);
    if (tokens[i].start >= begin && tokens[i].end <= end) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == tokens.size()) return false;
  const size_t lo = first >= kToyWindow ? first - kToyWindow : 0;
  const size_t hi = std::min(tokens.size(), last + 1 + kToyWindow);
  for (size_t i = lo; i < hi; ++i) {
    if (i < first || i > last) near.insert(tokens[i].lower);
  }
  for (const ToyToken& token : ToyTokenize(question)) {
    if (everywhere.contains(token.lower) && !near.contains(token.lower)) {
      return false;
    }
  }
  return true;
}

// The question is only kept when a plain lexical-overlap reader finds the
// answer: the gold span must be the reference argmax.
bool Locatable(const std::string& context, size_t begin, size_t end,
               const std::string& question) {
  ToyModelParams reference;
  reference.w = {8.0, -8.0, -1.0, 0.0};
  reference.noanswer_bias = -50.0;
  const ToyDistribution distribution =
      ToySoftmax(reference, ToyFeaturize(context, question));
  const ToyFeaturized featurized = ToyFeaturize(context, question);
  if (!distribution.best) return false;
  const SpanRef best = featurized.spans[*distribution.best];
  return best.char_start == begin && best.char_end == end;
}

class Generator {
 public:
  explicit Generator(uint64_t seed) : rng_(seed), years_(Years()) {}

  template <typename T>
  const T& Pick(const std::vector<T>& values) {
    return values[rng_.UniformIndex(values.size())];
  }

  bool Coin(double p) { return rng_.UniformUnit() < p; }

  Slot RandomSlot() { return static_cast<Slot>(rng_.UniformIndex(4)); }

  // `count` events with pairwise distinct people, places and years.
  std::vector<Event> Events(size_t count) {
    std::vector<Event> events;
    auto fresh = [&](auto member, const std::vector<std::string>& pool) {
      for (;;) {
        const std::string& value = Pick(pool);
        bool used = false;
        for (const Event& e : events) used = used || e.*member == value;
        if (!used) return value;
      }
    };
    for (size_t i = 0; i < count; ++i) {
      Event e;
      e.person = fresh(&Event::person, People());
      e.place = fresh(&Event::place, Places());
      e.year = fresh(&Event::year, years_);
      e.noun = Pick(Nouns());
      e.verb = Pick(Verbs());
      if (Coin(0.25)) e.adjective = Pick(Adjectives());
      events.push_back(std::move(e));
    }
    return events;
  }

  // Appends one event sentence; records where each slot starts.
  void Sentence(Builder& b, const Event& e, size_t starts[4]) {
    switch (rng_.UniformIndex(3)) {
      case 0:
        b.Word("In", "IN");
        starts[2] = b.Entity(e.year, "DATE", "CD");
        b.Word(",", ",");
        starts[0] = b.Entity(e.person, "PERSON", "NNP");
        b.Word(e.verb, "VBD");
        starts[3] = b.Noun(e);
        b.Word("in", "IN");
        starts[1] = b.Entity(e.place, "GPE", "NNP");
        break;
      case 1:
        starts[0] = b.Entity(e.person, "PERSON", "NNP");
        b.Word(e.verb, "VBD");
        starts[3] = b.Noun(e);
        b.Word("in", "IN");
        starts[1] = b.Entity(e.place, "GPE", "NNP");
        b.Word("in", "IN");
        starts[2] = b.Entity(e.year, "DATE", "CD");
        break;
      default:
        b.Word("The", "DT");
        if (!e.adjective.empty()) b.Word(e.adjective, "JJ");
        b.Word(e.noun, "NN");
        starts[3] = b.tokens().back().char_start;
        b.Word("in", "IN");
        starts[1] = b.Entity(e.place, "GPE", "NNP");
        b.Word("was", "VBD");
        b.Word(e.verb, "VBN");
        b.Word("by", "IN");
        starts[0] = b.Entity(e.person, "PERSON", "NNP");
        b.Word("in", "IN");
        starts[2] = b.Entity(e.year, "DATE", "CD");
        break;
    }
    b.Word(".", ".");
  }

  TaggedQuestion Question(const Event& e, Slot slot) {
    Builder b;
    const bool extra = Coin(0.5);
    const bool adjective = !e.adjective.empty() && Coin(0.5);
    auto noun = [&] {
      b.Word("the", "DT");
      if (adjective) b.Word(e.adjective, "JJ");
      b.Word(e.noun, "NN");
    };
    switch (slot) {
      case Slot::kPerson:
        b.Word("Who", "WP");
        b.Word(e.verb, "VBD");
        noun();
        b.Word("in", "IN");
        b.Entity(e.place, "GPE", "NNP");
        if (extra) {
          b.Word("in", "IN");
          b.Entity(e.year, "DATE", "CD");
        }
        break;
      case Slot::kYear:
        b.Word("In", "IN");
        b.Word("what", "WDT");
        b.Word("year", "NN");
        b.Word("was", "VBD");
        noun();
        b.Word("in", "IN");
        b.Entity(e.place, "GPE", "NNP");
        b.Word(e.verb, "VBN");
        if (extra) {
          b.Word("by", "IN");
          b.Entity(e.person, "PERSON", "NNP");
        }
        break;
      case Slot::kPlace:
        b.Word("Where", "WRB");
        b.Word("was", "VBD");
        noun();
        b.Word(e.verb, "VBN");
        b.Word("by", "IN");
        b.Entity(e.person, "PERSON", "NNP");
        if (extra) {
          b.Word("in", "IN");
          b.Entity(e.year, "DATE", "CD");
        }
        break;
      case Slot::kNoun:
        b.Word("What", "WP");
        b.Word("was", "VBD");
        b.Word(e.verb, "VBN");
        b.Word("by", "IN");
        b.Entity(e.person, "PERSON", "NNP");
        b.Word("in", "IN");
        b.Entity(e.place, "GPE", "NNP");
        if (extra) {
          b.Word("in", "IN");
          b.Entity(e.year, "DATE", "CD");
        }
        break;
    }
    b.Word("?", ".");
    return TaggedQuestion{b.text(), b.tokens(), b.entities()};
  }

  Sample MakeSample(const std::string& id, const BenchmarkOptions& options) {
    const size_t count = 3 + rng_.UniformIndex(3);
    std::vector<Event> events = Events(count + 1);
    const Event outsider = events.back();
    events.pop_back();

    Builder context;
    std::vector<std::array<size_t, 4>> starts(events.size());
    std::vector<size_t> order(events.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng_.Shuffle(order);
    // Filler between events keeps each event outside the others' windows.
    if (Coin(0.5)) context.Raw(Pick(Fillers()));
    for (size_t i = 0; i < order.size(); ++i) {
      if (i > 0) context.Raw(Pick(Fillers()));
      Sentence(context, events[order[i]], starts[order[i]].data());
    }
    if (Coin(0.5)) context.Raw(Pick(Fillers()));

    Sample sample;
    sample.id = id;
    sample.context = context.text();
    const double draw = rng_.UniformUnit();

    if (draw < options.unrelated_fraction) {
      sample.question = Question(outsider, RandomSlot());
      sample.is_impossible = true;
      return sample;
    }
    if (draw < options.unrelated_fraction + options.near_miss_fraction) {
      // Borrow one cue from another event of the same context.
      const size_t target = rng_.UniformIndex(events.size());
      const Slot slot = RandomSlot();
      Event asked = events[target];
      const Event& other =
          events[(target + 1 + rng_.UniformIndex(events.size() - 1)) %
                 events.size()];
      std::vector<Slot> cues;
      for (const Slot s : {Slot::kPerson, Slot::kPlace, Slot::kYear}) {
        if (s != slot) cues.push_back(s);
      }
      switch (Pick(cues)) {
        case Slot::kPerson: asked.person = other.person; break;
        case Slot::kPlace: asked.place = other.place; break;
        default: asked.year = other.year; break;
      }
      sample.question = Question(asked, slot);
      sample.is_impossible = true;
      return sample;
    }

    // Answerable. Most questions only use words found near the answer; a
    // few are allowed to reach further.
    const bool far_ok = Coin(options.uncovered_fraction);
    for (int attempt = 0;; ++attempt) {
      const size_t target = rng_.UniformIndex(events.size());
      const Slot slot = RandomSlot();
      const Event& asked = events[target];
      std::string answer;
      switch (slot) {
        case Slot::kPerson: answer = asked.person; break;
        case Slot::kPlace: answer = asked.place; break;
        case Slot::kYear: answer = asked.year; break;
        case Slot::kNoun: answer = asked.noun; break;
      }
      const size_t start = starts[target][static_cast<size_t>(slot)];
      TaggedQuestion question = Question(asked, slot);
      if (far_ok || attempt >= 50 ||
          (Covered(sample.context, start, start + answer.size(),
                   question.text) &&
           Locatable(sample.context, start, start + answer.size(),
                     question.text))) {
        sample.question = std::move(question);
        sample.answers.push_back({answer, start});
        return sample;
      }
    }
  }

  std::vector<TaggedCorpusRecord> Corpus() {
    std::vector<TaggedCorpusRecord> corpus;
    const size_t n = std::max({People().size(), Places().size(), years_.size(),
                               Nouns().size(), Verbs().size()});
    for (size_t i = 0; i < n; ++i) {
      Event e;
      e.person = People()[i % People().size()];
      e.place = Places()[i % Places().size()];
      e.year = years_[i % years_.size()];
      e.noun = Nouns()[i % Nouns().size()];
      e.verb = Verbs()[i % Verbs().size()];
      e.adjective = Adjectives()[i % Adjectives().size()];
      Builder b;
      size_t starts[4];
      Sentence(b, e, starts);
      // Corpus offsets are stored in code points, like on disk.
      const OffsetMap offsets(b.text());
      std::vector<TaggedToken> tokens = b.tokens();
      for (TaggedToken& token : tokens) {
        token.char_start = offsets.ToCodepoint(token.char_start);
        token.char_end = offsets.ToCodepoint(token.char_end);
      }
      corpus.push_back({"doc-" + std::to_string(i), std::move(tokens),
                        b.entities()});
    }
    return corpus;
  }

 private:
  Rng rng_;
  std::vector<std::string> years_;
};

std::vector<Sample> Split(Generator& generator, const std::string& prefix,
                          size_t count, const BenchmarkOptions& options) {
  std::vector<Sample> samples;
  samples.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    std::string number = std::to_string(i);
    number.insert(0, 4 - std::min<size_t>(4, number.size()), '0');
    samples.push_back(generator.MakeSample(prefix + "-" + number, options));
  }
  return samples;
}

}  // namespace

Benchmark MakeBenchmark(const BenchmarkOptions& options) {
  Benchmark benchmark;
  Generator train(DeriveSeed(options.seed, {Fnv1a64("train")}));
  Generator dev(DeriveSeed(options.seed, {Fnv1a64("dev")}));
  Generator test(DeriveSeed(options.seed, {Fnv1a64("test")}));
  Generator corpus(DeriveSeed(options.seed, {Fnv1a64("corpus")}));
  benchmark.train = Split(train, "train", options.train, options);
  benchmark.dev = Split(dev, "dev", options.dev, options);
  benchmark.test = Split(test, "test", options.test, options);
  benchmark.corpus = corpus.Corpus();
  return benchmark;
}

}  // namespace undersense
