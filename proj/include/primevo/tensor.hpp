// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "primevo/common.hpp"

namespace primevo {

// Dense rank-3 array [batch, seq, channel] of doubles, row-major. This is the
// universal runtime value type: attention maps are tensors whose channel axis
// equals the sequence length (see is_square_map).
struct Shape {
    int batch = 0;
    int seq = 0;
    int channel = 0;

    std::int64_t size() const {
        return static_cast<std::int64_t>(batch) * seq * channel;
    }
    bool operator==(const Shape&) const = default;
};

class Tensor {
  public:
    Tensor() = default;
    Tensor(int batch, int seq, int channel, double fill = 0.0)
        : shape_{batch, seq, channel},
          data_(static_cast<std::size_t>(shape_.size()), fill) {
        if (batch <= 0 || seq <= 0 || channel <= 0) {
            throw ShapeMismatch("tensor dims must be positive");
        }
    }

    static Tensor scalar(double v) {
        Tensor t(1, 1, 1);
        t.data_[0] = v;
        return t;
    }

    const Shape& shape() const { return shape_; }
    int batch() const { return shape_.batch; }
    int seq() const { return shape_.seq; }
    int channel() const { return shape_.channel; }
    std::int64_t size() const { return shape_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& at(int b, int s, int c) {
        return data_[(static_cast<std::size_t>(b) * shape_.seq + s) * shape_.channel + c];
    }
    double at(int b, int s, int c) const {
        return data_[(static_cast<std::size_t>(b) * shape_.seq + s) * shape_.channel + c];
    }

    // Attention-map predicate: the trailing two axes are equal length.
    bool is_square_map() const { return shape_.seq == shape_.channel; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Tensor& o) const {
        return shape_ == o.shape_ && data_ == o.data_;
    }

    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

  private:
    Shape shape_{};
    std::vector<double> data_;
};

// Semantic alias: (batch, seq, seq) map of attention logits or weights.
using AttentionMap = Tensor;

}  // namespace primevo
