#pragma once

#include <array>
#include <string>
#include <variant>

#include "garssl/error.hpp"

namespace garssl {

struct ImageDims {
  int width = 0;
  int height = 0;

  bool valid() const { return width >= 1 && height >= 1; }
  bool operator==(const ImageDims&) const = default;
};

/// Axis-aligned box, [x1,y1,x2,y2] with x1 < x2 and y1 < y2, coordinates in
/// [0,W] x [0,H]. Continuous coordinates; rounding happens only at the
/// prompt-serialization boundary.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  std::array<double, 4> coords() const { return {x1, y1, x2, y2}; }
  bool operator==(const BoundingBox&) const = default;
};

/// Whole-box shift plus independent per-side adjustments.
struct DeltaOp {
  double dx = 0.0;
  double dy = 0.0;
  double d_left = 0.0;
  double d_right = 0.0;
  double d_top = 0.0;
  double d_bottom = 0.0;
};

/// Symmetric grow (amount > 0) or shrink (amount < 0) of every side.
struct ExpandShrinkOp {
  double amount = 0.0;
};

/// Move the box center to (cx, cy), size unchanged (edge clamping may still
/// shrink the result).
struct RecenterOp {
  double cx = 0.0;
  double cy = 0.0;
};

using RefinementOp = std::variant<DeltaOp, ExpandShrinkOp, RecenterOp>;

std::string op_name(const RefinementOp& op);

/// Clamps raw coordinates into [0,W] x [0,H] and checks the strict ordering
/// invariants. `clamped`, when given, reports whether any coordinate moved.
Result<BoundingBox> validate_box(const std::array<double, 4>& raw, const ImageDims& dims,
                                 bool* clamped = nullptr);

/// Continuous-area intersection over union. Total over valid boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

Result<BoundingBox> apply_delta(const BoundingBox& box, const DeltaOp& op, const ImageDims& dims,
                                bool* clamped = nullptr);
Result<BoundingBox> apply_expand_shrink(const BoundingBox& box, double amount,
                                        const ImageDims& dims, bool* clamped = nullptr);
Result<BoundingBox> apply_recenter(const BoundingBox& box, double cx, double cy,
                                   const ImageDims& dims, bool* clamped = nullptr);

Result<BoundingBox> apply_op(const BoundingBox& box, const RefinementOp& op, const ImageDims& dims,
                             bool* clamped = nullptr);

}  // namespace garssl
