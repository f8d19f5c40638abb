#include "harborscan/image.hpp"

#include <cstring>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace harborscan {

Image load_image(const std::filesystem::path& p) {
  cv::Mat m = cv::imread(p.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw std::runtime_error("cannot decode image " + p.string());
  if (m.depth() != CV_8U) {
    cv::Mat tmp;
    m.convertTo(tmp, CV_8U, m.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    m = tmp;
  }
  if (m.channels() == 4) {
    std::vector<cv::Mat> planes;
    cv::split(m, planes);
    planes.pop_back();
    cv::merge(planes, m);
  } else if (m.channels() == 2) {
    std::vector<cv::Mat> planes;
    cv::split(m, planes);
    m = planes[0];
  }
  Image img(m.cols, m.rows, m.channels());
  const std::size_t row = static_cast<std::size_t>(m.cols) * m.channels();
  for (int y = 0; y < m.rows; ++y) std::memcpy(img.data.data() + row * y, m.ptr<std::uint8_t>(y), row);
  return img;
}

void save_image(const std::filesystem::path& p, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("save_image needs 1 or 3 channels");
  cv::Mat m(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3,
            const_cast<std::uint8_t*>(img.data.data()));
  if (!cv::imwrite(p.string(), m)) throw std::runtime_error("cannot encode image " + p.string());
}

}  // namespace harborscan
