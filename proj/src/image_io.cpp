#include <algorithm>
#include <cmath>
#include <filesystem>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "thermofuse/error.hpp"
#include "thermofuse/raster.hpp"

namespace thermofuse {

namespace {

std::string lower_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Raster read_raster(const std::string& path) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw Error(ErrorCode::IoError, "cannot read raster " + path);
  if (mat.channels() != 1 && mat.channels() != 3 && mat.channels() != 4) {
    throw Error(ErrorCode::BandCountMismatch,
                path + ": unsupported channel count " + std::to_string(mat.channels()));
  }
  cv::Mat as_double;
  mat.convertTo(as_double, CV_MAKETYPE(CV_64F, mat.channels()));
  std::vector<cv::Mat> planes;
  cv::split(as_double, planes);
  if (planes.size() == 4) planes.pop_back();  // alpha
  if (planes.size() == 3) std::swap(planes[0], planes[2]);  // BGR -> RGB

  Raster out(as_double.cols, as_double.rows, static_cast<int>(planes.size()));
  for (int b = 0; b < out.bands(); ++b) {
    for (int r = 0; r < out.height(); ++r) {
      const double* row = planes[b].ptr<double>(r);
      for (int c = 0; c < out.width(); ++c) out.at(b, r, c) = row[c];
    }
  }
  for (double v : out.samples()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::IoError, path + ": non-finite sample");
  }
  return out;
}

void write_raster(const std::string& path, const Raster& img) {
  const std::string ext = lower_extension(path);
  const bool tiff = ext == ".tif" || ext == ".tiff";
  if (!tiff && ext != ".png") throw Error(ErrorCode::IoError, "unsupported raster extension " + path);
  if (!tiff && img.bands() != 1 && img.bands() != 3) {
    throw Error(ErrorCode::BandCountMismatch, "PNG output needs 1 or 3 bands");
  }

  std::vector<cv::Mat> planes;
  for (int b = 0; b < img.bands(); ++b) {
    cv::Mat plane(img.height(), img.width(), tiff ? CV_32F : CV_8U);
    for (int r = 0; r < img.height(); ++r) {
      for (int c = 0; c < img.width(); ++c) {
        const double v = img.at(b, r, c);
        if (tiff) {
          plane.at<float>(r, c) = static_cast<float>(v);
        } else {
          plane.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
      }
    }
    planes.push_back(plane);
  }
  if (planes.size() == 3) std::swap(planes[0], planes[2]);
  cv::Mat merged;
  cv::merge(planes, merged);

  std::error_code ec;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  bool ok = false;
  try {
    ok = cv::imwrite(path, merged);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::IoError, "cannot write raster " + path + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::IoError, "cannot write raster " + path);
}

}  // namespace thermofuse
