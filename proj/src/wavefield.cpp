#include "fga/wavefield.hpp"

#include "fga/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace fga {

namespace {

static_assert(std::endian::native == std::endian::little, "wave field IO assumes a little-endian host");

constexpr char kMagic[6] = {'F', 'G', 'A', 'W', 'F', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorKind::kInvalidInput, "truncated wave field file");
  return v;
}

}  // namespace

WaveField::WaveField(int dim_, int points_, double length_, double eps_, double time_)
    : dim(dim_), points(points_), length(length_), eps(eps_), time(time_) {
  validate();
  data.assign(dim == 1 ? points : static_cast<std::size_t>(points) * points, cplx{});
}

int WaveField::cells() const { return static_cast<int>(std::lround(length / eps)); }

int WaveField::points_per_cell() const {
  const int c = cells();
  if (points % c != 0) {
    fail(ErrorKind::kResolution, "grid points per axis (" + std::to_string(points) +
                                     ") must be a multiple of L/eps (" + std::to_string(c) + ")");
  }
  return points / c;
}

Vec WaveField::position(std::size_t flat_index) const {
  Vec x(dim);
  if (dim == 1) {
    x[0] = flat_index * spacing();
  } else {
    x[0] = (flat_index / points) * spacing();
    x[1] = (flat_index % points) * spacing();
  }
  return x;
}

std::size_t WaveField::flat(const IVec& idx) const {
  std::size_t f = 0;
  for (int a = 0; a < dim; ++a) {
    int j = idx[a] % points;
    if (j < 0) j += points;
    f = f * points + j;
  }
  return f;
}

bool WaveField::same_grid(const WaveField& o) const {
  return dim == o.dim && points == o.points && length == o.length && eps == o.eps;
}

void WaveField::validate() const {
  if (dim < 1 || dim > kMaxDim) fail(ErrorKind::kInvalidInput, "wave field dimension must be 1 or 2");
  if (points < 1) fail(ErrorKind::kInvalidInput, "wave field needs at least one point per axis");
  if (!(eps > 0.0 && eps <= 1.0)) fail(ErrorKind::kInvalidInput, "eps must lie in (0, 1]");
  if (!(length > 0.0)) fail(ErrorKind::kInvalidInput, "domain length must be positive");
  const double c = length / eps;
  if (std::abs(c - std::round(c)) > 1e-9 * c || std::round(c) < 1) {
    fail(ErrorKind::kInvalidInput, "L/eps must be a positive integer so V(x/eps) is periodic on the domain");
  }
}

double WaveField::norm() const {
  double s = 0.0;
  for (const cplx& z : data) s += std::norm(z);
  return std::sqrt(s * cell_volume());
}

WaveField& WaveField::operator+=(const WaveField& o) {
  if (!same_grid(o)) fail(ErrorKind::kGridMismatch, "adding wave fields on different grids");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  return *this;
}

WaveField& WaveField::operator*=(cplx s) {
  for (cplx& z : data) z *= s;
  return *this;
}

Distance l2_distance(const WaveField& a, const WaveField& b) {
  if (!a.same_grid(b)) fail(ErrorKind::kGridMismatch, "l2_distance on different grids");
  if (std::abs(a.time - b.time) > 1e-12 * (1.0 + std::abs(a.time))) {
    fail(ErrorKind::kGridMismatch, "l2_distance between fields at different times");
  }
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    diff += std::norm(a.data[i] - b.data[i]);
    ref += std::norm(b.data[i]);
  }
  Distance d;
  d.absolute = std::sqrt(diff * a.cell_volume());
  const double nb = std::sqrt(ref * a.cell_volume());
  d.relative = nb > 0.0 ? d.absolute / nb : d.absolute;
  return d;
}

void write_wavefield(std::ostream& out, const WaveField& w) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.points));
  put<double>(out, w.length);
  put<double>(out, w.eps);
  put<double>(out, w.time);
  for (const cplx& z : w.data) {
    put<double>(out, z.real());
    put<double>(out, z.imag());
  }
  if (!out) fail(ErrorKind::kResource, "failed writing wave field");
}

WaveField read_wavefield(std::istream& in) {
  char magic[6];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    fail(ErrorKind::kInvalidInput, "not a wave field file (bad magic)");
  }
  const auto d = get<std::uint32_t>(in);
  const auto n = get<std::uint32_t>(in);
  const double length = get<double>(in);
  const double eps = get<double>(in);
  const double t = get<double>(in);
  WaveField w(static_cast<int>(d), static_cast<int>(n), length, eps, t);
  for (cplx& z : w.data) {
    const double re = get<double>(in);
    const double im = get<double>(in);
    z = {re, im};
  }
  return w;
}

void save_wavefield(const std::string& path, const WaveField& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kResource, "cannot open " + path + " for writing");
  write_wavefield(out, w);
}

WaveField load_wavefield(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kInvalidInput, "cannot open " + path);
  return read_wavefield(in);
}

void write_density_csv(std::ostream& out, const WaveField& w) {
  out << (w.dim == 1 ? "x" : "x_1,x_2") << ",density\n";
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Vec x = w.position(i);
    for (int a = 0; a < w.dim; ++a) out << format_double(x[a]) << ',';
    out << format_double(std::norm(w.data[i])) << '\n';
  }
}

}  // namespace fga
