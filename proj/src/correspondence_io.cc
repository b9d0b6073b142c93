#include "rcme/correspondence_io.h"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string_view>

namespace rcme {

namespace {

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) {
      ++pos;
    }
    const size_t start = pos;
    while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) {
      ++pos;
    }
    if (pos > start) fields.push_back(line.substr(start, pos - start));
  }
  return fields;
}

[[noreturn]] void Fail(ErrorCode code, const std::string& source, int line,
                       const std::string& what) {
  throw Error(code, source + ":" + std::to_string(line) + ": " + what);
}

double ParseNumber(std::string_view field, const std::string& source, int line) {
  double value = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    Fail(ErrorCode::kParse, source, line,
         "expected a finite number, got '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

CorrespondenceFile ParseCorrespondences(std::istream& in, const std::string& source) {
  CorrespondenceFile file;
  std::optional<Intrinsics> K;
  std::optional<double> sigma;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const auto fields = SplitFields(line);
    if (fields.empty()) continue;

    if (fields[0] == "K") {
      if (K) Fail(ErrorCode::kParse, source, line_no, "duplicate K header");
      if (!file.correspondences.empty()) {
        Fail(ErrorCode::kParse, source, line_no, "K header after correspondences");
      }
      if (fields.size() != 6) {
        Fail(ErrorCode::kParse, source, line_no, "K header needs fx fy cx cy skew");
      }
      double v[5];
      for (int i = 0; i < 5; ++i) v[i] = ParseNumber(fields[i + 1], source, line_no);
      try {
        K = Intrinsics(v[0], v[1], v[2], v[3], v[4]);
      } catch (const Error& e) {
        Fail(ErrorCode::kParse, source, line_no, e.what());
      }
    } else if (fields[0] == "sigma") {
      if (sigma) Fail(ErrorCode::kParse, source, line_no, "duplicate sigma header");
      if (!file.correspondences.empty()) {
        Fail(ErrorCode::kParse, source, line_no, "sigma header after correspondences");
      }
      if (fields.size() != 2) {
        Fail(ErrorCode::kParse, source, line_no, "sigma header needs one value");
      }
      sigma = ParseNumber(fields[1], source, line_no);
      if (!(*sigma > 0.0)) Fail(ErrorCode::kParse, source, line_no, "sigma must be positive");
    } else {
      if (!K) Fail(ErrorCode::kParse, source, line_no, "missing K header before data");
      if (fields.size() != 4) {
        Fail(ErrorCode::kParse, source, line_no,
             "expected 'x y xp yp', got " + std::to_string(fields.size()) + " fields");
      }
      double v[4];
      for (int i = 0; i < 4; ++i) v[i] = ParseNumber(fields[i], source, line_no);
      file.correspondences.emplace_back(Vector2(v[0], v[1]), Vector2(v[2], v[3]));
    }
  }
  if (in.bad()) throw Error(ErrorCode::kIo, source + ": read error");
  if (!K) Fail(ErrorCode::kParse, source, line_no, "missing K header");
  if (file.correspondences.size() < 8) {
    Fail(ErrorCode::kTooFewCorrespondences, source, line_no,
         "need at least 8 correspondences, found " +
             std::to_string(file.correspondences.size()));
  }
  file.K = *K;
  file.sigma_defaulted = !sigma.has_value();
  file.noise = NoiseModel(sigma.value_or(0.5));
  return file;
}

CorrespondenceFile LoadCorrespondences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, path + ": cannot open for reading");
  return ParseCorrespondences(in, path);
}

void WriteCorrespondences(std::ostream& out,
                          const std::vector<Correspondence>& correspondences,
                          const Intrinsics& K, const NoiseModel& noise) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "K " << K.fx << ' ' << K.fy << ' ' << K.cx << ' ' << K.cy << ' ' << K.skew
      << '\n';
  out << "sigma " << noise.sigma << '\n';
  for (const Correspondence& c : correspondences) {
    out << c.x.x() << ' ' << c.x.y() << ' ' << c.xp.x() << ' ' << c.xp.y() << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

void SaveCorrespondences(const std::string& path,
                         const std::vector<Correspondence>& correspondences,
                         const Intrinsics& K, const NoiseModel& noise) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, path + ": cannot open for writing");
  WriteCorrespondences(out, correspondences, K, noise);
  if (!out) throw Error(ErrorCode::kIo, path + ": write failed");
}

}  // namespace rcme
