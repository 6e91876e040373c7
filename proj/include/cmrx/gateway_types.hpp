#pragma once

#include <string>
#include <vector>

#include "cmrx/record.hpp"

namespace cmrx {

/// The parsed outcomes of repeated stochastic extractions of one report.
struct SampleSet {
  std::string report_id;
  std::vector<ParseOutcome> attempts;
  double temperature = 0.3;
};

}  // namespace cmrx
