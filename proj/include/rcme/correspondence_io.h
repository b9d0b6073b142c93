#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rcme/types.h"

namespace rcme {

// Text format, '#' starts a comment:
//   K fx fy cx cy skew
//   sigma <value>        (optional, default 0.5)
//   x y xp yp            (one line per correspondence, pixels)
struct CorrespondenceFile {
  std::vector<Correspondence> correspondences;
  Intrinsics K;
  NoiseModel noise;
  bool sigma_defaulted = false;
};

// Errors carry "<source>:<line>: ..." messages. kParse for malformed content,
// kTooFewCorrespondences below 8 pairs, kIo when the file cannot be read.
CorrespondenceFile ParseCorrespondences(std::istream& in,
                                        const std::string& source = "<stream>");
CorrespondenceFile LoadCorrespondences(const std::string& path);

// Writes with round-trip precision.
void WriteCorrespondences(std::ostream& out,
                          const std::vector<Correspondence>& correspondences,
                          const Intrinsics& K, const NoiseModel& noise);
void SaveCorrespondences(const std::string& path,
                         const std::vector<Correspondence>& correspondences,
                         const Intrinsics& K, const NoiseModel& noise);

}  // namespace rcme
