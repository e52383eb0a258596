#pragma once

#include <random>
#include <string>

#include "genderpair/parser.hpp"
#include "genderpair/promptgen.hpp"
#include "genderpair/text.hpp"
#include "support/support.hpp"

namespace gptest {

struct PropertyOutcome {
  size_t trials = 0;
  size_t failures = 0;
  std::string first_failure;
};

// Random registry, random filler, one marked descriptor (and optionally the marked target).
// The parser must recover exactly the embedded choice.
inline PropertyOutcome parser_round_trip(size_t trials, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto reg = genderpair::GenderTargetRegistry::from_json(random_registry_json(rng, 4, 12));
  PropertyOutcome out;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> filler_len(0, 14);
  const std::string punct[] = {"", ",", ".", ";", "!", "?"};
  for (size_t t = 0; t < trials; ++t) {
    auto g = genderpair::kAllGroups[std::uniform_int_distribution<size_t>(0, 2)(rng)];
    auto targets = reg.benchmark_targets(g);
    auto triplets = reg.triplets(g);
    const auto& target = targets[std::uniform_int_distribution<size_t>(0, targets.size() - 1)(rng)];
    const auto& tr = triplets[std::uniform_int_distribution<size_t>(0, triplets.size() - 1)(rng)];
    auto variant = static_cast<genderpair::PromptVariant>(std::uniform_int_distribution<int>(1, 3)(rng));
    auto marker = genderpair::marker_for(variant);
    bool pick_biased = coin(rng) == 1;
    std::string chosen = pick_biased ? tr.biased : tr.anti_biased;
    std::string shown = chosen;
    if (coin(rng)) shown[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(shown[0])));
    std::string inner = coin(rng) ? shown : " " + shown + " ";

    auto filler = [&] {
      std::string s;
      int n = filler_len(rng);
      for (int i = 0; i < n; ++i) {
        std::string w = random_word(rng, 2, 8);
        while (w == tr.biased || w == tr.anti_biased) w = random_word(rng, 2, 8);
        s += w + punct[std::uniform_int_distribution<size_t>(0, 5)(rng)] + " ";
      }
      return s;
    };
    std::string text = filler();
    bool mark_target = coin(rng) == 1;
    if (mark_target) text += std::string(1, marker.open) + target.surface + marker.close + " " + filler();
    text += std::string(1, marker.open) + inner + marker.close + punct[std::uniform_int_distribution<size_t>(0, 5)(rng)];
    text += " " + filler();

    auto sel = genderpair::parse_text(text, tr.biased, tr.anti_biased, marker);
    auto want = pick_biased ? genderpair::Verdict::Biased : genderpair::Verdict::AntiBiased;
    bool ok = sel.verdict == want && sel.method == genderpair::MatchMethod::Marked && sel.matched_span &&
              genderpair::text::casefold(*sel.matched_span) == chosen;
    ++out.trials;
    if (!ok) {
      if (out.failures == 0) out.first_failure = text;
      ++out.failures;
    }
  }
  return out;
}

}  // namespace gptest
