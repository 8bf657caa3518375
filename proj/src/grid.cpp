#include "sedloss/grid.hpp"

#include <cmath>

namespace sedloss {

PredictionGrid::PredictionGrid(Matrix values) : values_(std::move(values)) {
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw ValidationError("prediction grid must have at least one frame and one class");
  }
  for (double v : values_.flat()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ValidationError("prediction scores must be finite and inside [0,1]");
    }
  }
}

LabelGrid::LabelGrid(Grid<std::uint8_t> values) : values_(std::move(values)) {
  for (auto v : values_.flat()) {
    if (v > 1) throw ValidationError("labels must be 0 or 1");
  }
}

LabelGrid LabelGrid::from_values(const Matrix& values) {
  Grid<std::uint8_t> out(values.rows(), values.cols());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values.flat()[i];
    if (v != 0.0 && v != 1.0) {
      throw ValidationError("labels must be exactly 0 or 1");
    }
    out.flat()[i] = v == 1.0 ? 1 : 0;
  }
  return LabelGrid(std::move(out));
}

std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace sedloss
