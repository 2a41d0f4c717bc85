#include "fluidnet/path_field.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "fluidnet/error.hpp"

namespace fluidnet {

TimeGrid TimeGrid::over(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw DomainError("TimeGrid: need dt > 0 and horizon >= 0");
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio))
    throw DomainError("TimeGrid: horizon is not an integer multiple of dt");
  return TimeGrid{steps, dt};
}

std::size_t TimeGrid::nearest(double t) const noexcept {
  if (t <= 0.0) return 0;
  const auto j = static_cast<std::size_t>(std::llround(t / dt));
  return std::min(j, steps);
}

PathField::PathField(std::size_t cells, TimeGrid grid, double fill)
    : cells_(cells), grid_(grid), v_(cells * grid.points(), fill) {}

PathField PathField::from_function(std::size_t cells, TimeGrid grid,
                                   const std::function<double(double, double)>& fn) {
  PathField f(cells, grid);
  for (std::size_t i = 0; i < cells; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(cells);
    for (std::size_t j = 0; j < grid.points(); ++j) f(i, j) = fn(u, grid.time(j));
  }
  return f;
}

std::vector<double> PathField::slice(std::size_t j) const {
  std::vector<double> s(cells_);
  for (std::size_t i = 0; i < cells_; ++i) s[i] = (*this)(i, j);
  return s;
}

PathField& PathField::operator+=(const PathField& other) {
  require_same_shape(*this, other, "PathField +=");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += other.v_[k];
  return *this;
}

PathField& PathField::operator-=(const PathField& other) {
  require_same_shape(*this, other, "PathField -=");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= other.v_[k];
  return *this;
}

PathField& PathField::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

double PathField::min_value() const {
  return v_.empty() ? 0.0 : *std::min_element(v_.begin(), v_.end());
}

bool PathField::is_increasing(double tol) const {
  for (std::size_t i = 0; i < cells_; ++i) {
    auto c = cell(i);
    if (c[0] < -tol) return false;
    for (std::size_t j = 1; j < c.size(); ++j)
      if (c[j] < c[j - 1] - tol) return false;
  }
  return true;
}

void require_same_shape(const PathField& a, const PathField& b, const char* what) {
  if (a.cells() != b.cells() || !(a.grid() == b.grid()))
    throw GridMismatch(std::string(what) + ": fields have different cell counts or time grids");
}

PathField refine(const PathField& a, std::size_t cells) {
  if (a.cells() == 0 || cells % a.cells() != 0)
    throw GridMismatch("refine: target cell count must be a multiple of the source");
  const std::size_t ratio = cells / a.cells();
  PathField out(cells, a.grid());
  for (std::size_t i = 0; i < cells; ++i) {
    auto src = a.cell(i / ratio);
    std::copy(src.begin(), src.end(), out.cell(i).begin());
  }
  return out;
}

PathField coarsen(const PathField& a, std::size_t cells) {
  if (cells == 0 || a.cells() % cells != 0)
    throw GridMismatch("coarsen: source cell count must be a multiple of the target");
  const std::size_t ratio = a.cells() / cells;
  PathField out(cells, a.grid());
  for (std::size_t b = 0; b < cells; ++b) {
    auto dst = out.cell(b);
    for (std::size_t r = 0; r < ratio; ++r) {
      auto src = a.cell(b * ratio + r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    for (double& x : dst) x /= static_cast<double>(ratio);
  }
  return out;
}

namespace {

std::string fmt17(double x) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return buf.data();
}

constexpr std::array<char, 4> kMagic{'F', 'N', 'P', 'F'};
constexpr std::uint32_t kBinaryVersion = 1;

template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "binary layout assumes little-endian host");
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw DomainError("read_binary: truncated input");
  return value;
}

}  // namespace

void write_csv(std::ostream& os, const PathField& f) {
  os << "# fluidnet-pathfield v1 cells=" << f.cells() << " steps=" << f.grid().steps
     << " dt=" << fmt17(f.grid().dt) << "\n";
  os << "cell_index,t,value\n";
  for (std::size_t i = 0; i < f.cells(); ++i)
    for (std::size_t j = 0; j < f.points(); ++j)
      os << i << ',' << fmt17(f.grid().time(j)) << ',' << fmt17(f(i, j)) << '\n';
}

PathField read_csv(std::istream& is) {
  std::string line;
  std::size_t cells = 0, steps = 0;
  double dt = 0.0;
  bool have_header = false;
  std::map<std::size_t, std::vector<std::pair<double, double>>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      unsigned long long c = 0, k = 0;
      if (std::sscanf(line.c_str(), "# fluidnet-pathfield v1 cells=%llu steps=%llu dt=%lf", &c, &k, &dt) == 3) {
        cells = c;
        steps = k;
        have_header = true;
      }
      continue;
    }
    if (line.rfind("cell_index", 0) == 0) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw DomainError("read_csv: malformed row '" + line + "'");
    rows[std::stoul(a)].emplace_back(std::stod(b), std::stod(c));
  }
  if (rows.empty()) throw DomainError("read_csv: no data rows");
  for (auto& [i, values] : rows) std::sort(values.begin(), values.end());
  if (!have_header) {
    cells = rows.rbegin()->first + 1;
    const auto& first = rows.begin()->second;
    steps = first.size() - 1;
    dt = steps > 0 ? first[1].first - first[0].first : 1.0;
  }
  if (rows.size() != cells) throw DomainError("read_csv: missing cells");
  PathField f(cells, TimeGrid{steps, dt});
  for (auto& [i, values] : rows) {
    if (i >= cells || values.size() != steps + 1) throw DomainError("read_csv: inconsistent row count");
    for (std::size_t j = 0; j < values.size(); ++j) f(i, j) = values[j].second;
  }
  return f;
}

void write_binary(std::ostream& os, const PathField& f) {
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kBinaryVersion);
  put<std::uint64_t>(os, f.cells());
  put<std::uint64_t>(os, f.grid().steps);
  put<double>(os, f.grid().dt);
  os.write(reinterpret_cast<const char*>(f.data().data()),
           static_cast<std::streamsize>(f.data().size() * sizeof(double)));
}

PathField read_binary(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw DomainError("read_binary: bad magic");
  const auto version = get<std::uint32_t>(is);
  if (version != kBinaryVersion) throw DomainError("read_binary: unsupported version " + std::to_string(version));
  const auto cells = get<std::uint64_t>(is);
  const auto steps = get<std::uint64_t>(is);
  const auto dt = get<double>(is);
  PathField f(cells, TimeGrid{steps, dt});
  is.read(reinterpret_cast<char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(double)));
  if (!is) throw DomainError("read_binary: truncated values");
  return f;
}

void save(const std::string& path, const PathField& f) {
  const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  binary ? write_binary(os, f) : write_csv(os, f);
}

PathField load(const std::string& path) {
  const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw DomainError("cannot open " + path);
  return binary ? read_binary(is) : read_csv(is);
}

}  // namespace fluidnet
