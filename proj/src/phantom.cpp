#include "tvlearn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "tvlearn/error.hpp"

namespace tvlearn {

namespace {

using Field = std::function<double(double, double)>;

bool in_disc(double x, double y, double cx, double cy, double r) {
  return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
}

bool in_triangle(double x, double y) {
  // vertices (0.2, 0.85), (0.45, 0.85), (0.2, 0.6)
  return x >= 0.2 && y <= 0.85 && (x - 0.2) + (0.85 - y) <= 0.25;
}

double shapes(double x, double y) {
  double v = 0.2;
  if (x >= 0.55 && x <= 0.85 && y >= 0.5 && y <= 0.8) v = 0.6;
  if (in_disc(x, y, 0.35, 0.35, 0.18)) v = 0.8;
  if (in_triangle(x, y)) v = 0.45;
  if (x >= 0.65 && x <= 0.75 && y >= 0.15 && y <= 0.3) v = 0.95;
  return v;
}

double ramp(double x, double y) {
  if (in_disc(x, y, 0.6, 0.45, 0.2)) return 0.9;
  return std::min(0.75, 0.15 + 0.6 * x);  // flat beyond x = 1 on wide grids
}

double mixed(double x, double y) {
  const double s = shapes(x, y);
  return s == 0.2 ? 0.15 + 0.2 * y : s;
}

Field lookup(const std::string& name) {
  if (name == "shapes") return shapes;
  if (name == "ramp") return ramp;
  if (name == "mixed" || name == "synthetic") return mixed;
  throw PreconditionError("unknown phantom '" + name + "'");
}

}  // namespace

std::vector<std::string> phantom_names() { return {"shapes", "ramp", "mixed"}; }

ImageGrid make_phantom(const std::string& name, std::size_t nx, std::size_t ny) {
  const Field f = lookup(name);
  ImageGrid img(nx, ny);
  const double h = img.h();
  constexpr int ss = 4;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      double acc = 0.0;
      for (int b = 0; b < ss; ++b) {
        for (int a = 0; a < ss; ++a) {
          const double x = (static_cast<double>(i) + (a + 0.5) / ss - 0.5) * h;
          const double y = (static_cast<double>(j) + (b + 0.5) / ss - 0.5) * h;
          acc += f(x, y);
        }
      }
      img(i, j) = acc / (ss * ss);
    }
  }
  return img;
}

}  // namespace tvlearn
