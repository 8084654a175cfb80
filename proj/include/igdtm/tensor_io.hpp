#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace igdtm {

/// Grayscale video, one column per frame. Column-major storage of the L x T
/// matrix is exactly the on-disk order: frame-major, row-major within a frame.
class VideoTensor {
public:
  VideoTensor() = default;
  /// Throws Error if the shape is inconsistent or a value is non-finite or
  /// outside [0, 1].
  VideoTensor(int rows, int cols, Eigen::MatrixXd pixels);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int frames() const noexcept { return static_cast<int>(pixels_.cols()); }
  int pixel_count() const noexcept { return rows_ * cols_; }

  /// L x T observation matrix; row i is the trace of pixel i = r * cols + c.
  const Eigen::MatrixXd& pixels() const noexcept { return pixels_; }

  double at(int frame, int row, int col) const { return pixels_(row * cols_ + col, frame); }

  friend bool operator==(const VideoTensor&, const VideoTensor&) = default;

private:
  int rows_ = 0;
  int cols_ = 0;
  Eigen::MatrixXd pixels_;
};

/// Per-pixel labels in [0, num_labels).
struct LabelField {
  int rows = 0;
  int cols = 0;
  int num_labels = 1;
  std::vector<int> labels;

  int size() const noexcept { return rows * cols; }
  int at(int row, int col) const { return labels[static_cast<std::size_t>(row * cols + col)]; }
  /// Throws Error when the invariants do not hold.
  void validate() const;

  friend bool operator==(const LabelField&, const LabelField&) = default;
};

struct GrayImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bytes;
  int maxval = 255;  ///< white level; samples lie in [0, maxval]
};

/// Binary 8-bit PGM ("P5", maxval <= 255). Comments are allowed in the header.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Every regular file in `dir`, sorted by filename, is read as one P5 frame
/// and scaled by 1 / maxval.
VideoTensor read_pgm_sequence(const std::filesystem::path& dir);

/// Frame `t` back to 8-bit gray, rounding to the nearest level.
GrayImage frame_to_image(const VideoTensor& tensor, int frame);

/// ".igt": magic "IGDT", version byte 1, rows/cols/frames as u32 LE, then
/// rows*cols*frames f64 LE values, frame-major and row-major within a frame.
void write_tensor_file(const std::filesystem::path& path, const VideoTensor& tensor);
VideoTensor read_tensor_file(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_tensor(const VideoTensor& tensor);
VideoTensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source);

/// Directory of PGM frames or a single .igt file.
VideoTensor load_video(const std::filesystem::path& input);

/// Each output voxel is the median of the (2r+1)^3 spatiotemporal cube around
/// it; the cube is clipped at the tensor borders. Even-sized windows take the
/// mean of the two middle values.
VideoTensor median_deinterlace(const VideoTensor& tensor, int radius);

/// Writes `<prefix>.csv` (row,col,label lines) and `<prefix>.pgm` with label j
/// drawn as floor(255 * j / max(1, K - 1)).
void write_label_field(const std::string& prefix, const LabelField& field);
std::string label_field_csv(const LabelField& field);
GrayImage label_field_image(const LabelField& field);

/// One parsed `row,col,label` line.
struct LabeledPixel {
  int row = 0;
  int col = 0;
  int label = 0;
};
std::vector<LabeledPixel> read_label_csv(const std::filesystem::path& path);
/// Dense field from CSV rows; every pixel of the bounding grid must appear once.
LabelField label_field_from_csv(const std::vector<LabeledPixel>& pixels, const std::string& source);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace igdtm
