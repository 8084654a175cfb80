#include "igdtm/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "igdtm/error.hpp"

namespace fs = std::filesystem;

namespace igdtm {

VideoTensor::VideoTensor(int rows, int cols, Eigen::MatrixXd pixels)
    : rows_(rows), cols_(cols), pixels_(std::move(pixels)) {
  if (rows_ <= 0 || cols_ <= 0 || pixels_.cols() <= 0)
    throw Error("video tensor dimensions must be positive");
  if (pixels_.rows() != static_cast<Eigen::Index>(rows_) * cols_)
    throw Error("video tensor: pixel matrix has " + std::to_string(pixels_.rows()) +
                " rows, expected rows*cols = " + std::to_string(rows_ * cols_));
  for (Eigen::Index k = 0; k < pixels_.size(); ++k) {
    const double v = pixels_.data()[k];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw Error("video tensor: value " + std::to_string(v) + " at flat index " +
                  std::to_string(k) + " is outside [0, 1]");
  }
}

void LabelField::validate() const {
  if (rows <= 0 || cols <= 0) throw Error("label field dimensions must be positive");
  if (num_labels <= 0) throw Error("label field needs at least one label");
  if (labels.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw Error("label field size does not match rows*cols");
  for (int l : labels)
    if (l < 0 || l >= num_labels)
      throw Error("label " + std::to_string(l) + " outside [0, " + std::to_string(num_labels) + ")");
}

namespace {

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError(path.string() + ": write failed");
}

// Header tokens of a PNM file: whitespace separated, '#' starts a comment that
// runs to the end of the line.
class PnmHeader {
public:
  PnmHeader(const std::vector<std::uint8_t>& bytes, const std::string& name)
      : bytes_(bytes), name_(name) {}

  std::string token() {
    skip_space_and_comments();
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#')
      tok.push_back(static_cast<char>(bytes_[pos_++]));
    if (tok.empty()) throw IoError(name_ + ": truncated PGM header");
    return tok;
  }

  int integer() {
    const std::string tok = token();
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw IoError(name_ + ": malformed PGM header field '" + tok + "'");
    try {
      return std::stoi(tok);
    } catch (const std::exception&) {
      throw IoError(name_ + ": PGM header field out of range '" + tok + "'");
    }
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw IoError(name_ + ": truncated PGM header");
    return pos_ + 1;
  }

private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFFu));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return v;
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFFu));
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(v);
}

constexpr char kMagic[4] = {'I', 'G', 'D', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 1 + 3 * 4;

}  // namespace

GrayImage read_pgm(const fs::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  PnmHeader header(bytes, name);
  const std::string magic = header.token();
  if (magic == "P6" || magic == "P3")
    throw IoError(name + ": color PNM input is not supported (grayscale P5 only)");
  if (magic != "P5") throw IoError(name + ": not a binary PGM (magic '" + magic + "')");
  GrayImage img;
  img.cols = header.integer();
  img.rows = header.integer();
  const int maxval = header.integer();
  if (img.cols <= 0 || img.rows <= 0) throw IoError(name + ": PGM dimensions must be positive");
  if (maxval <= 0 || maxval > 255) throw IoError(name + ": only 8-bit PGM is supported (maxval " + std::to_string(maxval) + ")");
  const std::size_t offset = header.raster_offset();
  const std::size_t n = static_cast<std::size_t>(img.rows) * static_cast<std::size_t>(img.cols);
  if (bytes.size() < offset + n)
    throw IoError(name + ": truncated PGM raster (" + std::to_string(bytes.size() - std::min(bytes.size(), offset)) +
                  " of " + std::to_string(n) + " bytes)");
  img.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                   bytes.begin() + static_cast<std::ptrdiff_t>(offset + n));
  img.maxval = maxval;
  if (const auto top = *std::max_element(img.bytes.begin(), img.bytes.end()); top > maxval)
    throw IoError(name + ": sample " + std::to_string(top) + " exceeds maxval " + std::to_string(maxval));
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n" +
                    std::to_string(image.maxval) + "\n";
  out.append(image.bytes.begin(), image.bytes.end());
  write_file_atomic(path, out);
}

VideoTensor read_pgm_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  if (files.empty()) throw IoError(dir.string() + ": no frames found");
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  const GrayImage first = read_pgm(files.front());
  const Eigen::Index L = static_cast<Eigen::Index>(first.rows) * first.cols;
  Eigen::MatrixXd pixels(L, static_cast<Eigen::Index>(files.size()));
  for (std::size_t t = 0; t < files.size(); ++t) {
    const GrayImage img = t == 0 ? first : read_pgm(files[t]);
    if (img.rows != first.rows || img.cols != first.cols)
      throw IoError(files[t].string() + ": frame is " + std::to_string(img.cols) + "x" + std::to_string(img.rows) +
                    ", expected " + std::to_string(first.cols) + "x" + std::to_string(first.rows));
    const double white = img.maxval;
    for (Eigen::Index i = 0; i < L; ++i) pixels(i, static_cast<Eigen::Index>(t)) = img.bytes[static_cast<std::size_t>(i)] / white;
  }
  return VideoTensor(first.rows, first.cols, std::move(pixels));
}

GrayImage frame_to_image(const VideoTensor& tensor, int frame) {
  GrayImage img{tensor.rows(), tensor.cols(), {}};
  img.bytes.resize(static_cast<std::size_t>(tensor.pixel_count()));
  for (int i = 0; i < tensor.pixel_count(); ++i)
    img.bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(tensor.pixels()(i, frame) * 255.0));
  return img;
}

std::vector<std::uint8_t> encode_tensor(const VideoTensor& tensor) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + static_cast<std::size_t>(tensor.pixels().size()) * 8);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion);
  put_u32(out, static_cast<std::uint32_t>(tensor.rows()));
  put_u32(out, static_cast<std::uint32_t>(tensor.cols()));
  put_u32(out, static_cast<std::uint32_t>(tensor.frames()));
  const double* data = tensor.pixels().data();
  for (Eigen::Index k = 0; k < tensor.pixels().size(); ++k) put_f64(out, data[k]);
  return out;
}

VideoTensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError(source + ": bad magic, not an IGDT tensor file");
  if (bytes.size() < kHeaderBytes) throw IoError(source + ": short read in tensor header");
  if (bytes[4] != kVersion) throw IoError(source + ": unsupported tensor file version " + std::to_string(bytes[4]));
  const std::uint32_t rows = get_u32(&bytes[5]);
  const std::uint32_t cols = get_u32(&bytes[9]);
  const std::uint32_t frames = get_u32(&bytes[13]);
  if (rows == 0 || cols == 0 || frames == 0) throw IoError(source + ": tensor header has a zero dimension");
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols * frames;
  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  if (payload < count * 8)
    throw IoError(source + ": short read, header declares " + std::to_string(count) + " values but payload holds " +
                  std::to_string(payload / 8));
  if (payload > count * 8) throw IoError(source + ": payload larger than header declares");
  Eigen::MatrixXd pixels(static_cast<Eigen::Index>(rows) * cols, frames);
  for (std::uint64_t k = 0; k < count; ++k) pixels.data()[k] = get_f64(&bytes[kHeaderBytes + 8 * k]);
  try {
    return VideoTensor(static_cast<int>(rows), static_cast<int>(cols), std::move(pixels));
  } catch (const Error& e) {
    throw IoError(source + ": " + e.what());
  }
}

void write_tensor_file(const fs::path& path, const VideoTensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

VideoTensor read_tensor_file(const fs::path& path) { return decode_tensor(slurp(path), path.string()); }

VideoTensor load_video(const fs::path& input) {
  if (fs::is_directory(input)) return read_pgm_sequence(input);
  if (!fs::exists(input)) throw IoError(input.string() + ": no such file or directory");
  return read_tensor_file(input);
}

VideoTensor median_deinterlace(const VideoTensor& tensor, int radius) {
  if (radius < 1) throw Error("median_deinterlace: radius must be >= 1");
  const int R = tensor.rows(), C = tensor.cols(), T = tensor.frames();
  const Eigen::MatrixXd& in = tensor.pixels();
  Eigen::MatrixXd out(in.rows(), in.cols());
  std::vector<double> window;
  window.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1) * (2 * radius + 1)));
  for (int t = 0; t < T; ++t) {
    const int t0 = std::max(0, t - radius), t1 = std::min(T - 1, t + radius);
    for (int r = 0; r < R; ++r) {
      const int r0 = std::max(0, r - radius), r1 = std::min(R - 1, r + radius);
      for (int c = 0; c < C; ++c) {
        const int c0 = std::max(0, c - radius), c1 = std::min(C - 1, c + radius);
        window.clear();
        for (int tt = t0; tt <= t1; ++tt)
          for (int rr = r0; rr <= r1; ++rr)
            for (int cc = c0; cc <= c1; ++cc) window.push_back(in(rr * C + cc, tt));
        const std::size_t mid = window.size() / 2;
        std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid), window.end());
        double med = window[mid];
        if (window.size() % 2 == 0) {
          const double lower = *std::max_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid));
          med = 0.5 * (lower + med);
        }
        out(r * C + c, t) = med;
      }
    }
  }
  return VideoTensor(R, C, std::move(out));
}

std::string label_field_csv(const LabelField& field) {
  std::ostringstream os;
  for (int r = 0; r < field.rows; ++r)
    for (int c = 0; c < field.cols; ++c) os << r << ',' << c << ',' << field.at(r, c) << '\n';
  return os.str();
}

GrayImage label_field_image(const LabelField& field) {
  GrayImage img{field.rows, field.cols, {}};
  const int denom = std::max(1, field.num_labels - 1);
  img.bytes.reserve(field.labels.size());
  for (int l : field.labels) img.bytes.push_back(static_cast<std::uint8_t>((255 * l) / denom));
  return img;
}

void write_label_field(const std::string& prefix, const LabelField& field) {
  field.validate();
  write_file_atomic(prefix + ".csv", label_field_csv(field));
  write_pgm(prefix + ".pgm", label_field_image(field));
}

std::vector<LabeledPixel> read_label_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::vector<LabeledPixel> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    LabeledPixel px;
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> px.row >> c1 >> px.col >> c2 >> px.label) || c1 != ',' || c2 != ',' || px.row < 0 || px.col < 0 ||
        px.label < 0)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 'row,col,label'");
    std::string rest;
    if (ls >> rest) throw IoError(path.string() + ":" + std::to_string(lineno) + ": trailing characters");
    out.push_back(px);
  }
  return out;
}

LabelField label_field_from_csv(const std::vector<LabeledPixel>& pixels, const std::string& source) {
  if (pixels.empty()) throw IoError(source + ": empty label file");
  LabelField f;
  for (const auto& p : pixels) {
    f.rows = std::max(f.rows, p.row + 1);
    f.cols = std::max(f.cols, p.col + 1);
    f.num_labels = std::max(f.num_labels, p.label + 1);
  }
  f.labels.assign(static_cast<std::size_t>(f.rows) * static_cast<std::size_t>(f.cols), -1);
  for (const auto& p : pixels) {
    int& slot = f.labels[static_cast<std::size_t>(p.row * f.cols + p.col)];
    if (slot != -1) throw IoError(source + ": duplicate pixel " + std::to_string(p.row) + "," + std::to_string(p.col));
    slot = p.label;
  }
  if (std::find(f.labels.begin(), f.labels.end(), -1) != f.labels.end())
    throw IoError(source + ": label grid has missing pixels");
  return f;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_bytes(tmp, contents.data(), contents.size());
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError(path.string() + ": cannot move temporary file into place");
  }
}

}  // namespace igdtm
