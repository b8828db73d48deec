#ifndef VIPER_IDX_HPP
#define VIPER_IDX_HPP

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

namespace viper::ingest {

// In-memory MNIST-style image store. Pixels are scaled to [0,1] and each
// nonzero image row is additionally normalized to unit L2 norm so inputs
// live on the unit sphere; all-zero images are kept as zeros.
struct ImageStore {
  Eigen::MatrixXd images;    // N x 784, row-major semantics (row = image)
  std::vector<int> labels;   // N values in 0..9
  std::string source_digest; // sha256 over both input files

  int count() const { return static_cast<int>(labels.size()); }
  int pixels() const { return static_cast<int>(images.cols()); }
};

// Parse a big-endian IDX image/label file pair (magics 0x00000803 and
// 0x00000801). Throws FormatError naming the offending file and byte
// offset on malformed input, and when the two counts disagree.
std::shared_ptr<const ImageStore> load_idx(const std::string& images_path,
                                           const std::string& labels_path);

}  // namespace viper::ingest

#endif
