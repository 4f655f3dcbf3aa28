#pragma once
// Brute-force reference for utterance affect summaries. Deliberately naive:
// index arithmetic over the raw frame vector, linear scans, no shared code
// with the library beyond the label enum.

#include <vector>

#include "empathic/affect.hpp"

namespace oracle {

struct Summary {
  std::vector<empathic::AffectLabel> top;
  std::vector<int> counts;  // indexed by label ordinal, over pooled labels
};

inline Summary summarize(const std::vector<empathic::AffectFrame>& frames, int window) {
  constexpr int kLabels = 8;
  Summary out;
  out.counts.assign(kLabels, 0);
  std::vector<int> pooled;  // pooled label ordinals in window order

  const int n = static_cast<int>(frames.size());
  for (int w = 0; w * window < n; ++w) {
    const int lo = w * window;
    const int hi = std::min(n, lo + window);
    int best = -1;
    int best_count = -1;
    int best_first = n + 1;
    for (int label = 0; label < kLabels; ++label) {
      int count = 0;
      int first = n + 1;
      for (int i = lo; i < hi; ++i) {
        if (static_cast<int>(frames[i].label) == label) {
          ++count;
          if (first > i) first = i;
        }
      }
      if (count == 0) continue;
      if (count > best_count || (count == best_count && first < best_first)) {
        best = label;
        best_count = count;
        best_first = first;
      }
    }
    pooled.push_back(best);
    out.counts[best] += 1;
  }

  // Top two non-neutral by count; ties by earliest pooled occurrence.
  std::vector<bool> taken(kLabels, false);
  for (int pick = 0; pick < 2; ++pick) {
    int best = -1;
    int best_count = 0;
    int best_first = 1 << 30;
    for (int label = 1; label < kLabels; ++label) {
      if (taken[label] || out.counts[label] == 0) continue;
      int first = 1 << 30;
      for (int k = 0; k < static_cast<int>(pooled.size()); ++k) {
        if (pooled[k] == label) {
          first = k;
          break;
        }
      }
      if (out.counts[label] > best_count || (out.counts[label] == best_count && first < best_first)) {
        best = label;
        best_count = out.counts[label];
        best_first = first;
      }
    }
    if (best < 0) break;
    taken[best] = true;
    out.top.push_back(static_cast<empathic::AffectLabel>(best));
  }
  return out;
}

}  // namespace oracle
