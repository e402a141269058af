#ifndef DCP_DATAIO_HPP
#define DCP_DATAIO_HPP

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "dcp/error.hpp"
#include "dcp/image.hpp"

namespace dcp {

namespace fs = std::filesystem;

struct FrameSequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<int> indices;

  size_t size() const { return frames.size(); }
};

enum class GroundTruthKind { BackgroundImage, FrameMasks };

struct GroundTruth {
  GroundTruthKind kind = GroundTruthKind::BackgroundImage;
  std::optional<Image> background;
  /// Binary masks keyed by original frame index; absent indices are simply missing.
  std::map<int, ForegroundMask> masks;
};

/// printf-like filename template such as "in%06d.jpg" split around its integer field.
struct FilenamePattern {
  std::string prefix;
  std::string suffix;
  int width = 0;

  static FilenamePattern parse(const std::string& pattern) {
    static const std::regex field(R"(%(0?)(\d*)d)");
    std::smatch m;
    require(std::regex_search(pattern, m, field), ErrorCode::InvalidArgument,
            "pattern needs one %d field: " + pattern);
    FilenamePattern p;
    p.prefix = m.prefix().str();
    p.suffix = m.suffix().str();
    p.width = m[2].length() ? std::stoi(m[2].str()) : 0;
    return p;
  }

  std::optional<int> match(const std::string& filename) const {
    if (filename.size() <= prefix.size() + suffix.size()) return std::nullopt;
    if (filename.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    if (filename.compare(filename.size() - suffix.size(), suffix.size(), suffix) != 0)
      return std::nullopt;
    const std::string digits =
        filename.substr(prefix.size(), filename.size() - prefix.size() - suffix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit))
      return std::nullopt;
    return std::stoi(digits);
  }

  std::string format(int index) const {
    std::string digits = std::to_string(index);
    if (static_cast<int>(digits.size()) < width)
      digits.insert(0, static_cast<size_t>(width) - digits.size(), '0');
    return prefix + digits + suffix;
  }
};

inline Image read_image(const fs::path& path) {
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    fail(ErrorCode::DecodeFailure, path.string() + ": " + e.what());
  }
  require(!mat.empty(), ErrorCode::DecodeFailure, "cannot decode " + path.string());
  require(mat.depth() == CV_8U, ErrorCode::DecodeFailure, "not an 8-bit image: " + path.string());
  const int src_ch = mat.channels();
  require(src_ch == 1 || src_ch == 3 || src_ch == 4, ErrorCode::DecodeFailure,
          "unsupported channel count in " + path.string());
  const int ch = src_ch == 1 ? 1 : 3;
  Image img(mat.rows, mat.cols, ch);
  for (int r = 0; r < mat.rows; ++r) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(r);
    for (int c = 0; c < mat.cols; ++c) {
      if (ch == 1) {
        img.at(r, c) = row[c] / 255.0;
      } else {
        // OpenCV stores BGR(A)
        const std::uint8_t* px = row + static_cast<size_t>(c) * src_ch;
        img.at(r, c, 0) = px[2] / 255.0;
        img.at(r, c, 1) = px[1] / 255.0;
        img.at(r, c, 2) = px[0] / 255.0;
      }
    }
  }
  return img;
}

namespace detail {

inline void require_writable_parent(const fs::path& path) {
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  require(fs::is_directory(parent, ec), ErrorCode::IoFailure,
          "parent directory missing: " + parent.string());
}

inline void write_mat_png(const cv::Mat& mat, const fs::path& path) {
  require_writable_parent(path);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat, {cv::IMWRITE_PNG_COMPRESSION, 3});
  } catch (const cv::Exception& e) {
    fail(ErrorCode::IoFailure, path.string() + ": " + e.what());
  }
  require(ok, ErrorCode::IoFailure, "cannot write " + path.string());
}

inline bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

}  // namespace detail

/// Writes an 8-bit PNG (lossless); values are rounded from [0,1].
inline void write_image(const Image& img, const fs::path& path) {
  cv::Mat mat(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int r = 0; r < img.height; ++r) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(r);
    for (int c = 0; c < img.width; ++c) {
      if (img.channels == 1) {
        row[c] = to_byte(img.at(r, c));
      } else {
        row[3 * c + 0] = to_byte(img.at(r, c, 2));
        row[3 * c + 1] = to_byte(img.at(r, c, 1));
        row[3 * c + 2] = to_byte(img.at(r, c, 0));
      }
    }
  }
  detail::write_mat_png(mat, path);
}

/// Foreground masks go to disk as {0,255}.
inline void write_mask(const ForegroundMask& mask, const fs::path& path) {
  cv::Mat mat(mask.height, mask.width, CV_8UC1);
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) mat.at<std::uint8_t>(r, c) = mask.at(r, c) ? 255 : 0;
  detail::write_mat_png(mat, path);
}

/// Binarizes luma at 0.5.
inline ForegroundMask read_mask(const fs::path& path) {
  const Image luma = to_luma(read_image(path));
  ForegroundMask mask(luma.height, luma.width);
  for (size_t i = 0; i < luma.values.size(); ++i) mask.values[i] = luma.values[i] >= 0.5 ? 1 : 0;
  return mask;
}

inline FrameSequence load_sequence(const fs::path& dir, const std::string& pattern) {
  const FilenamePattern fp = FilenamePattern::parse(pattern);
  std::error_code ec;
  require(fs::is_directory(dir, ec), ErrorCode::MissingFrames, "not a directory: " + dir.string());

  std::vector<std::pair<int, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (auto idx = fp.match(entry.path().filename().string())) found.emplace_back(*idx, entry.path());
  }
  require(found.size() >= 2, ErrorCode::MissingFrames,
          dir.string() + " has " + std::to_string(found.size()) + " frames matching " + pattern);
  std::sort(found.begin(), found.end());
  for (size_t i = 1; i < found.size(); ++i)
    require(found[i].first != found[i - 1].first, ErrorCode::MissingFrames,
            "duplicate frame index " + std::to_string(found[i].first));

  FrameSequence seq;
  seq.name = dir.filename().string() == "input" ? dir.parent_path().filename().string()
                                                : dir.filename().string();
  for (const auto& [idx, path] : found) {
    Image img = read_image(path);
    if (!seq.frames.empty())
      require(img.same_shape(seq.frames.front()), ErrorCode::DimensionMismatch,
              path.filename().string() + " differs in size or channels from the first frame");
    seq.frames.push_back(std::move(img));
    seq.indices.push_back(idx);
  }
  return seq;
}

/// Reads either a single background image (file or one-file directory) or a
/// directory of `gt%06d.png` masks.
inline GroundTruth load_ground_truth(const fs::path& path, GroundTruthKind kind,
                                     const std::string& mask_pattern = "gt%06d.png") {
  std::error_code ec;
  require(fs::exists(path, ec), ErrorCode::MissingGroundTruth, "missing " + path.string());
  const FilenamePattern fp = FilenamePattern::parse(mask_pattern);

  GroundTruth gt;
  gt.kind = kind;
  if (kind == GroundTruthKind::BackgroundImage) {
    if (fs::is_regular_file(path)) {
      gt.background = read_image(path);
      return gt;
    }
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (!entry.is_regular_file() || !detail::is_image_file(entry.path())) continue;
      require(!fp.match(entry.path().filename().string()), ErrorCode::KindMismatch,
              path.string() + " holds per-frame masks, not a background image");
      images.push_back(entry.path());
    }
    require(!images.empty(), ErrorCode::MissingGroundTruth, "no image in " + path.string());
    require(images.size() == 1, ErrorCode::KindMismatch,
            path.string() + " holds several images; expected one background");
    gt.background = read_image(images.front());
    return gt;
  }

  require(fs::is_directory(path), ErrorCode::KindMismatch,
          path.string() + " is a file; expected a mask directory");
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    if (auto idx = fp.match(entry.path().filename().string()))
      gt.masks.emplace(*idx, read_mask(entry.path()));
  }
  require(!gt.masks.empty(), ErrorCode::KindMismatch,
          "no files matching " + mask_pattern + " in " + path.string());
  return gt;
}

/// A CSV report: one label column followed by fixed numeric columns.
struct ReportTable {
  std::vector<std::string> columns;  // includes the leading label column
  struct Row {
    std::string label;
    std::vector<double> values;
  };
  std::vector<Row> rows;
};

inline std::string format_fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string to_csv(const ReportTable& table) {
  std::string out;
  for (size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += table.columns[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    out += row.label;
    for (double v : row.values) out += ',' + format_fixed4(v);
    out += '\n';
  }
  return out;
}

inline void write_text(const std::string& text, const fs::path& path) {
  detail::require_writable_parent(path);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoFailure, "cannot open " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::IoFailure, "write failed: " + path.string());
}

inline void write_report(const ReportTable& table, const fs::path& path) {
  write_text(to_csv(table), path);
}

}  // namespace dcp

#endif  // DCP_DATAIO_HPP
