#include "ionlab/histogram.hpp"

#include <cmath>
#include <stdexcept>

namespace ionlab {

void McsHistogram::validate() const {
  if (!(std::isfinite(bin_width) && bin_width > 0.0))
    throw std::invalid_argument("McsHistogram: bin_width must be > 0");
  if (counts.size() == 0)
    throw std::invalid_argument("McsHistogram: no bins");
  if ((counts < 0).any())
    throw std::invalid_argument("McsHistogram: negative count");
  if (n_sequences < 1)
    throw std::invalid_argument("McsHistogram: n_sequences must be >= 1");
  if (!(std::isfinite(background_rate) && background_rate >= 0.0))
    throw std::invalid_argument("McsHistogram: background_rate must be >= 0");
}

}  // namespace ionlab
