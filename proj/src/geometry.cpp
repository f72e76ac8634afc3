#include "garssl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace garssl {

namespace {

std::string coords_str(const std::array<double, 4>& c) {
  std::ostringstream os;
  os << "[" << c[0] << "," << c[1] << "," << c[2] << "," << c[3] << "]";
  return os.str();
}

}  // namespace

std::string op_name(const RefinementOp& op) {
  if (std::holds_alternative<DeltaOp>(op)) return "delta";
  if (std::holds_alternative<ExpandShrinkOp>(op)) {
    return std::get<ExpandShrinkOp>(op).amount < 0.0 ? "shrink" : "expand";
  }
  return "recenter";
}

Result<BoundingBox> validate_box(const std::array<double, 4>& raw, const ImageDims& dims,
                                 bool* clamped) {
  if (clamped) *clamped = false;
  for (double v : raw) {
    if (!std::isfinite(v)) {
      return make_error(ErrorCode::NonFinite, "box coordinate is not finite: " + coords_str(raw));
    }
  }
  const double w = static_cast<double>(dims.width);
  const double h = static_cast<double>(dims.height);
  BoundingBox box{
      std::clamp(raw[0], 0.0, w),
      std::clamp(raw[1], 0.0, h),
      std::clamp(raw[2], 0.0, w),
      std::clamp(raw[3], 0.0, h),
  };
  if (clamped) {
    *clamped = box.coords() != raw;
  }
  if (!(box.x1 < box.x2) || !(box.y1 < box.y2)) {
    return make_error(ErrorCode::DegenerateBox,
                      "box collapses after clamping: " + coords_str(raw) + " in " +
                          std::to_string(dims.width) + "x" + std::to_string(dims.height));
  }
  return box;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

Result<BoundingBox> apply_delta(const BoundingBox& box, const DeltaOp& op, const ImageDims& dims,
                                bool* clamped) {
  return validate_box({box.x1 + op.dx + op.d_left, box.y1 + op.dy + op.d_top,
                       box.x2 + op.dx + op.d_right, box.y2 + op.dy + op.d_bottom},
                      dims, clamped);
}

Result<BoundingBox> apply_expand_shrink(const BoundingBox& box, double amount,
                                        const ImageDims& dims, bool* clamped) {
  return validate_box({box.x1 - amount, box.y1 - amount, box.x2 + amount, box.y2 + amount}, dims,
                      clamped);
}

Result<BoundingBox> apply_recenter(const BoundingBox& box, double cx, double cy,
                                   const ImageDims& dims, bool* clamped) {
  // Target must land inside the image before the box is rebuilt around it.
  const double tx = std::clamp(cx, 0.0, static_cast<double>(dims.width));
  const double ty = std::clamp(cy, 0.0, static_cast<double>(dims.height));
  const double hw = 0.5 * box.width();
  const double hh = 0.5 * box.height();
  bool edge_clamped = false;
  auto out = validate_box({tx - hw, ty - hh, tx + hw, ty + hh}, dims, &edge_clamped);
  if (clamped) *clamped = edge_clamped || tx != cx || ty != cy;
  return out;
}

Result<BoundingBox> apply_op(const BoundingBox& box, const RefinementOp& op, const ImageDims& dims,
                             bool* clamped) {
  if (const auto* d = std::get_if<DeltaOp>(&op)) return apply_delta(box, *d, dims, clamped);
  if (const auto* e = std::get_if<ExpandShrinkOp>(&op)) {
    return apply_expand_shrink(box, e->amount, dims, clamped);
  }
  const auto& r = std::get<RecenterOp>(op);
  return apply_recenter(box, r.cx, r.cy, dims, clamped);
}

}  // namespace garssl
