#pragma once

#include <cstdint>

#include <Eigen/Dense>

// Multi-channel-scaler style histogram: photon arrival counts binned in
// time, accumulated over repeated sequences.

namespace ionlab {

struct McsHistogram {
  double bin_width = 0.0;                    // s
  Eigen::ArrayX<std::int64_t> counts;        // per-bin totals, >= 0
  std::int64_t n_sequences = 0;
  double background_rate = 0.0;              // expected background counts per bin

  Eigen::Index n_bins() const { return counts.size(); }

  // Background-subtracted counts; may be negative.
  Eigen::ArrayXd net() const {
    return counts.cast<double>() - background_rate;
  }

  // Left edge of each bin, seconds from detection start.
  Eigen::ArrayXd bin_starts() const {
    return Eigen::ArrayXd::LinSpaced(counts.size(), 0.0,
                                     bin_width * double(counts.size() - 1));
  }

  // Throws std::invalid_argument on violated invariants.
  void validate() const;
};

}  // namespace ionlab
