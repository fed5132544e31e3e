#include "facecycle/tensors.hpp"

#include <string>

#include "facecycle/errors.hpp"

namespace facecycle {

namespace {

std::string shape_str(const torch::Tensor& t) {
  std::string s = "(";
  for (std::int64_t i = 0; i < t.dim(); ++i) s += (i ? ", " : "") + std::to_string(t.size(i));
  return s + ")";
}

}  // namespace

bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

ImageBatch::ImageBatch(torch::Tensor t) : data(std::move(t)) {
  if (!data.defined() || data.dim() != 4 || data.size(0) < 1 || data.size(2) != data.size(3))
    throw Error(Errc::ShapeMismatch, "image batch must be (B, C, r, r), got " + shape_str(data));
}

ClipBatch::ClipBatch(torch::Tensor t) : data(std::move(t)) {
  if (!data.defined() || data.dim() != 5 || data.size(0) < 1 || data.size(3) != data.size(4))
    throw Error(Errc::ShapeMismatch, "clip batch must be (B, C, L, r, r), got " + shape_str(data));
}

ImageBatch ClipBatch::frame(std::int64_t i) const { return ImageBatch(data.select(2, i)); }

LatentCode::LatentCode(torch::Tensor t) : data(std::move(t)) {
  if (!data.defined() || data.dim() != 4 || data.size(2) != kLatentExtent || data.size(3) != kLatentExtent)
    throw Error(Errc::ShapeMismatch, "latent code must be (B, D, 4, 4), got " + shape_str(data));
}

}  // namespace facecycle
