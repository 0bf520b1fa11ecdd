#include "padeit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <fmt/os.h>

#include "padeit/error.hpp"

namespace padeit {

namespace {

constexpr double kPi = std::numbers::pi;

struct Facet {
    std::array<int, 3> key; // sorted node indices; unused slot = -1 (2D)
    int element;
    int opposite;           // local vertex not on the facet
};

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

std::vector<Facet> collect_facets(int dim, std::span<const Element> elements) {
    const int nv = dim + 1;
    std::vector<Facet> facets;
    facets.reserve(elements.size() * static_cast<std::size_t>(nv));
    for (std::size_t e = 0; e < elements.size(); ++e) {
        for (int skip = 0; skip < nv; ++skip) {
            std::array<int, 3> key{-1, -1, -1};
            int k = 0;
            for (int v = 0; v < nv; ++v) {
                if (v != skip) key[static_cast<std::size_t>(k++)] = elements[e][static_cast<std::size_t>(v)];
            }
            std::sort(key.begin(), key.begin() + dim);
            facets.push_back({key, static_cast<int>(e), skip});
        }
    }
    std::sort(facets.begin(), facets.end(), [](const Facet& a, const Facet& b) {
        return a.key != b.key ? a.key < b.key : a.element < b.element;
    });
    return facets;
}

} // namespace

double signed_measure(int dim, std::span<const Vec3> nodes, const Element& el) {
    const Vec3& p0 = nodes[static_cast<std::size_t>(el[0])];
    const Vec3 e1 = nodes[static_cast<std::size_t>(el[1])] - p0;
    const Vec3 e2 = nodes[static_cast<std::size_t>(el[2])] - p0;
    if (dim == 2) {
        return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
    }
    const Vec3 e3 = nodes[static_cast<std::size_t>(el[3])] - p0;
    return e1.cross(e2).dot(e3) / 6.0;
}

// --- Mesh -------------------------------------------------------------------

Mesh::Mesh(int dim, std::vector<Vec3> nodes, std::vector<Element> elements,
           std::vector<double> conductivity) {
    if (dim != 2 && dim != 3) throw ValidationError(fmt::format("unsupported dimension {}", dim));
    if (nodes.empty()) throw ValidationError("mesh has no nodes");
    if (elements.empty()) throw ValidationError("mesh has no elements");

    auto topo = std::make_shared<Topology>();
    topo->dim = dim;
    topo->nodes = std::move(nodes);
    topo->elements = std::move(elements);
    const int nv = dim + 1;
    const auto n_nodes = static_cast<int>(topo->nodes.size());

    for (auto& p : topo->nodes) {
        if (!p.allFinite()) throw ValidationError("node coordinate is not finite");
        if (dim == 2) p.z() = 0.0;
    }

    topo->measures.resize(topo->elements.size());
    topo->centroids.resize(topo->elements.size());
    for (std::size_t e = 0; e < topo->elements.size(); ++e) {
        auto& el = topo->elements[e];
        for (int v = 0; v < nv; ++v) {
            const int idx = el[static_cast<std::size_t>(v)];
            if (idx < 0 || idx >= n_nodes) {
                throw ValidationError(fmt::format(
                    "element {} references missing node {} (node count {})", e, idx, n_nodes));
            }
        }
        if (dim == 2) el[3] = -1;
        for (int a = 0; a < nv; ++a)
            for (int b = a + 1; b < nv; ++b)
                if (el[static_cast<std::size_t>(a)] == el[static_cast<std::size_t>(b)])
                    throw ValidationError(fmt::format("element {} repeats node {}", e, el[static_cast<std::size_t>(a)]));

        const double m = signed_measure(dim, topo->nodes, el);
        if (!(m > 0.0)) {
            throw ValidationError(fmt::format(
                "element {} has non-positive {} ({:.6g})", e, dim == 2 ? "area" : "volume", m));
        }
        topo->measures[e] = m;
        Vec3 c = Vec3::Zero();
        for (int v = 0; v < nv; ++v) c += topo->nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(v)])];
        topo->centroids[e] = c / nv;
        topo->total_measure += m;
    }

    // Facet pairing: interior facets appear twice, boundary facets once.
    const auto facets = collect_facets(dim, topo->elements);
    DisjointSet components(topo->elements.size());
    topo->boundary_flag.assign(topo->nodes.size(), 0);
    topo->normals.assign(topo->nodes.size(), Vec3::Zero());
    for (std::size_t i = 0; i < facets.size();) {
        std::size_t j = i + 1;
        while (j < facets.size() && facets[j].key == facets[i].key) ++j;
        const std::size_t run = j - i;
        if (run > 2) {
            throw ValidationError(fmt::format("facet shared by {} elements (non-manifold)", run));
        }
        if (run == 2) {
            components.unite(static_cast<std::size_t>(facets[i].element),
                             static_cast<std::size_t>(facets[i + 1].element));
        } else {
            const Facet& f = facets[i];
            const auto& el = topo->elements[static_cast<std::size_t>(f.element)];
            const Vec3& inner = topo->nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(f.opposite)])];
            const Vec3& a = topo->nodes[static_cast<std::size_t>(f.key[0])];
            const Vec3& b = topo->nodes[static_cast<std::size_t>(f.key[1])];
            Vec3 normal;
            if (dim == 2) {
                const Vec3 t = b - a;
                normal = Vec3(t.y(), -t.x(), 0.0);
            } else {
                normal = (b - a).cross(topo->nodes[static_cast<std::size_t>(f.key[2])] - a);
            }
            if (normal.dot(inner - a) > 0.0) normal = -normal;
            for (int v = 0; v < dim; ++v) {
                const auto n = static_cast<std::size_t>(f.key[static_cast<std::size_t>(v)]);
                topo->boundary_flag[n] = 1;
                topo->normals[n] += normal;
            }
        }
        i = j;
    }
    const std::size_t root = components.find(0);
    for (std::size_t e = 1; e < topo->elements.size(); ++e) {
        if (components.find(e) != root) {
            throw ValidationError(fmt::format("element adjacency graph is disconnected (element {})", e));
        }
    }
    for (std::size_t n = 0; n < topo->nodes.size(); ++n) {
        if (topo->boundary_flag[n]) {
            topo->boundary.push_back(static_cast<int>(n));
            const double len = topo->normals[n].norm();
            if (len > 0.0) topo->normals[n] /= len;
        }
    }

    topo->bounds.lo = topo->nodes.front();
    topo->bounds.hi = topo->nodes.front();
    for (const auto& p : topo->nodes) {
        topo->bounds.lo = topo->bounds.lo.cwiseMin(p);
        topo->bounds.hi = topo->bounds.hi.cwiseMax(p);
    }

    check_conductivity(conductivity, topo->elements.size());
    topo_ = std::move(topo);
    conductivity_ = std::move(conductivity);
}

Mesh::Mesh(std::shared_ptr<const Topology> topo, std::vector<double> conductivity)
    : topo_(std::move(topo)), conductivity_(std::move(conductivity)) {
    check_conductivity(conductivity_, topo_->elements.size());
}

void Mesh::check_conductivity(std::span<const double> sigma, std::size_t expected) {
    if (sigma.size() != expected) {
        throw ValidationError(fmt::format("conductivity count {} does not match element count {}",
                                          sigma.size(), expected));
    }
    for (std::size_t e = 0; e < sigma.size(); ++e) {
        if (!std::isfinite(sigma[e]) || !(sigma[e] > 0.0)) {
            throw ValidationError(fmt::format(
                "element {} conductivity must be positive and finite (got {})", e, sigma[e]));
        }
    }
}

bool Mesh::is_boundary(int node) const {
    return node >= 0 && static_cast<std::size_t>(node) < topo_->boundary_flag.size() &&
           topo_->boundary_flag[static_cast<std::size_t>(node)] != 0;
}

Mesh Mesh::with_conductivity(std::vector<double> conductivity) const {
    return Mesh(topo_, std::move(conductivity));
}

Mesh with_uniform_conductivity(const Mesh& mesh, double sigma) {
    return mesh.with_conductivity(std::vector<double>(mesh.element_count(), sigma));
}

// --- Generators ---------------------------------------------------------------

namespace {

struct Ring {
    double radius;
    int count;
    double phase;
};

struct Disc {
    std::vector<Vec3> nodes;
    std::vector<Element> triangles;
};

/// Rings ordered from the innermost outward; a single centre node is added
/// first. Consecutive rings are stitched by merging their angular sequences.
Disc ring_disc(const std::vector<Ring>& rings) {
    Disc disc;
    disc.nodes.emplace_back(0.0, 0.0, 0.0);
    std::vector<int> first;
    for (const auto& ring : rings) {
        first.push_back(static_cast<int>(disc.nodes.size()));
        for (int i = 0; i < ring.count; ++i) {
            const double t = ring.phase + 2.0 * kPi * i / ring.count;
            disc.nodes.emplace_back(ring.radius * std::cos(t), ring.radius * std::sin(t), 0.0);
        }
    }
    auto add = [&](int a, int b, int c) {
        Element el{a, b, c, -1};
        if (signed_measure(2, disc.nodes, el) < 0.0) std::swap(el[1], el[2]);
        disc.triangles.push_back(el);
    };

    for (int i = 0; i < rings.front().count; ++i) {
        add(0, first[0] + i, first[0] + (i + 1) % rings.front().count);
    }
    for (std::size_t r = 1; r < rings.size(); ++r) {
        const Ring& in = rings[r - 1];
        const Ring& out = rings[r];
        auto angle = [](const Ring& ring, int i) { return ring.phase + 2.0 * kPi * i / ring.count; };
        auto id = [&](std::size_t ring, int i) { return first[ring] + i % rings[ring].count; };
        int i = 0;
        int j = 0;
        while (i < in.count || j < out.count) {
            const bool advance_inner =
                j == out.count || (i < in.count && angle(in, i + 1) < angle(out, j + 1));
            if (advance_inner) {
                add(id(r - 1, i), id(r - 1, i + 1), id(r, j));
                ++i;
            } else {
                add(id(r - 1, i), id(r, j + 1), id(r, j));
                ++j;
            }
        }
    }
    return disc;
}

Disc uniform_disc(double radius, int rings, int per_ring) {
    std::vector<Ring> spec;
    for (int k = 1; k <= rings; ++k) {
        spec.push_back({radius * k / rings, per_ring * k, 0.0});
    }
    return ring_disc(spec);
}

/// Extrudes a 2D disc through the given z levels. Each prism is split into
/// three tetrahedra using the global-index rule, which keeps quad-face
/// diagonals consistent between neighbouring prisms.
Mesh extrude(const Disc& disc, const std::vector<double>& levels) {
    const auto per_layer = static_cast<int>(disc.nodes.size());
    std::vector<Vec3> nodes;
    nodes.reserve(disc.nodes.size() * levels.size());
    for (double z : levels) {
        for (const auto& p : disc.nodes) nodes.emplace_back(p.x(), p.y(), z);
    }
    std::vector<Element> tets;
    tets.reserve(disc.triangles.size() * 3 * (levels.size() - 1));
    for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
        const int lo = static_cast<int>(l) * per_layer;
        const int hi = lo + per_layer;
        for (const auto& tri : disc.triangles) {
            std::array<int, 3> v{tri[0], tri[1], tri[2]};
            std::sort(v.begin(), v.end());
            const Element candidates[3] = {
                {lo + v[0], lo + v[1], lo + v[2], hi + v[0]},
                {lo + v[1], lo + v[2], hi + v[0], hi + v[1]},
                {lo + v[2], hi + v[0], hi + v[1], hi + v[2]},
            };
            for (Element el : candidates) {
                if (signed_measure(3, nodes, el) < 0.0) std::swap(el[2], el[3]);
                tets.push_back(el);
            }
        }
    }
    std::vector<double> sigma(tets.size(), 1.0);
    return Mesh(3, std::move(nodes), std::move(tets), std::move(sigma));
}

/// Levels from 0 to `height`, marching outward from `focus` with local step
/// `step(distance_from_focus)`. A trailing sliver is merged into its neighbour.
template <class Step>
std::vector<double> graded_levels(double height, double focus, Step step) {
    focus = std::clamp(focus, 0.0, height);
    std::vector<double> up{focus};
    while (up.back() < height) {
        const double t = step(up.back() - focus);
        double next = up.back() + t;
        if (height - next < 0.4 * t) next = height;
        up.push_back(std::min(next, height));
    }
    std::vector<double> down{focus};
    while (down.back() > 0.0) {
        const double t = step(focus - down.back());
        double next = down.back() - t;
        if (next < 0.4 * t) next = 0.0;
        down.push_back(std::max(next, 0.0));
    }
    std::vector<double> levels(down.rbegin(), down.rend());
    levels.insert(levels.end(), up.begin() + 1, up.end());
    // focus may coincide with an end of the domain
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    return levels;
}

} // namespace

Mesh generate_disc_mesh(double radius, int target_element_count) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw InvalidArgument(fmt::format("disc radius must be positive (got {})", radius));
    }
    if (target_element_count < 8) {
        throw InvalidArgument(fmt::format("target element count must be >= 8 (got {})", target_element_count));
    }
    // m·n^2 triangles for n rings of m·k nodes
    const int rings = std::max(1, static_cast<int>(std::lround(std::sqrt(target_element_count / 6.0))));
    const int per_ring = std::max(3, static_cast<int>(std::lround(
                                         static_cast<double>(target_element_count) / (rings * rings))));
    Disc disc = uniform_disc(radius, rings, per_ring);
    std::vector<double> sigma(disc.triangles.size(), 1.0);
    return Mesh(2, std::move(disc.nodes), std::move(disc.triangles), std::move(sigma));
}

Mesh generate_cylinder_mesh(double radius, double height, int target_element_count) {
    if (!(radius > 0.0) || !(height > 0.0) || !std::isfinite(radius) || !std::isfinite(height)) {
        throw InvalidArgument(fmt::format("cylinder dimensions must be positive (r={}, h={})", radius, height));
    }
    if (target_element_count < 18) {
        throw InvalidArgument(fmt::format("target element count must be >= 18 (got {})", target_element_count));
    }
    // 3·6·n^2·L tetrahedra with layer thickness close to the ring spacing
    const double n_est = std::cbrt(target_element_count * radius / (18.0 * height));
    const int rings = std::max(1, static_cast<int>(std::lround(n_est)));
    const int layers = std::max(1, static_cast<int>(std::lround(target_element_count / (18.0 * rings * rings))));
    const Disc disc = uniform_disc(radius, rings, 6);
    std::vector<double> levels;
    for (int l = 0; l <= layers; ++l) levels.push_back(height * l / layers);
    return extrude(disc, levels);
}

Mesh generate_graded_cylinder_mesh(const GradedCylinderSpec& s) {
    if (!(s.radius > 0.0) || !(s.height > 0.0)) {
        throw InvalidArgument(fmt::format("cylinder dimensions must be positive (r={}, h={})", s.radius, s.height));
    }
    if (!(s.surface_spacing > 0.0) || s.core_spacing < s.surface_spacing || s.growth < 0.0) {
        throw InvalidArgument("graded cylinder needs 0 < surface_spacing <= core_spacing and growth >= 0");
    }
    auto size_at = [&](double distance) {
        return std::min(s.core_spacing, s.surface_spacing + s.growth * std::max(0.0, distance));
    };

    // Rings from the surface inward, then reversed.
    std::vector<Ring> rings;
    double r = s.radius;
    int k = 0;
    while (true) {
        const double h = size_at(s.radius - r);
        const int count = std::max(6, static_cast<int>(std::ceil(2.0 * kPi * r / h)));
        rings.push_back({r, count, (k % 2) ? kPi / count : 0.0});
        const double next = r - size_at(s.radius - r + 0.5 * h);
        if (next < 0.6 * size_at(s.radius - next)) break;
        r = next;
        ++k;
    }
    std::reverse(rings.begin(), rings.end());
    const Disc disc = ring_disc(rings);

    const auto levels = graded_levels(s.height, s.focus_z, [&](double d) {
        return size_at(d - s.focus_halfwidth);
    });
    return extrude(disc, levels);
}

// --- Ellipsoids ---------------------------------------------------------------

bool EllipsoidInclusion::contains(const Vec3& p) const {
    if (empty()) return false;
    const Vec3 q = (p - center).cwiseQuotient(radii);
    return q.squaredNorm() <= 1.0;
}

double EllipsoidInclusion::volume_ml() const {
    if (empty()) return 0.0;
    return 4.0 / 3.0 * kPi * radii.prod() / 1000.0;
}

EllipsoidInclusion volume_to_ellipsoid(double volume_ml, const Vec3& aspect, const Vec3& center,
                                       double conductivity) {
    if (!(volume_ml >= 0.0) || !std::isfinite(volume_ml)) {
        throw InvalidArgument(fmt::format("volume must be >= 0 (got {})", volume_ml));
    }
    if (!((aspect.array() > 0.0).all()) || !aspect.allFinite()) {
        throw InvalidArgument("aspect components must be positive");
    }
    if (!(conductivity > 0.0)) throw InvalidArgument("inclusion conductivity must be positive");
    EllipsoidInclusion inc;
    inc.center = center;
    inc.conductivity = conductivity;
    if (volume_ml == 0.0) return inc;
    const double mm3 = volume_ml * 1000.0;
    const double scale = std::cbrt(3.0 * mm3 / (4.0 * kPi * aspect.prod()));
    inc.radii = scale * aspect;
    return inc;
}

Mesh apply_inclusion(const Mesh& mesh, const EllipsoidInclusion& inclusion) {
    if (!mesh.bounds().contains(inclusion.center, 1e-9)) {
        throw InvalidArgument("inclusion centre lies outside the mesh bounding box");
    }
    std::vector<double> sigma(mesh.conductivity().begin(), mesh.conductivity().end());
    if (!inclusion.empty()) {
        for (std::size_t e = 0; e < sigma.size(); ++e) {
            if (inclusion.contains(mesh.centroid(e))) sigma[e] = inclusion.conductivity;
        }
    }
    return mesh.with_conductivity(std::move(sigma));
}

// --- File format --------------------------------------------------------------

namespace {

struct Tokenizer {
    std::istream& in;
    int line_no = 0;
    std::vector<std::string> tokens;

    /// Next non-empty line; false on EOF.
    bool next() {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            std::istringstream ss(line);
            tokens.clear();
            for (std::string t; ss >> t;) tokens.push_back(t);
            if (!tokens.empty()) return true;
        }
        return false;
    }
};

double parse_double(const std::string& s, int line) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ParseError(fmt::format("expected a number, got '{}'", s), line);
    }
    if (pos != s.size()) throw ParseError(fmt::format("expected a number, got '{}'", s), line);
    return v;
}

long parse_int(const std::string& s, int line) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (const std::exception&) {
        throw ParseError(fmt::format("expected an integer, got '{}'", s), line);
    }
    if (pos != s.size()) throw ParseError(fmt::format("expected an integer, got '{}'", s), line);
    return v;
}

long parse_header(Tokenizer& tok, const char* keyword) {
    if (!tok.next()) throw ParseError(fmt::format("unexpected end of file, expected '{}'", keyword), tok.line_no);
    if (tok.tokens.size() != 2 || tok.tokens[0] != keyword) {
        throw ParseError(fmt::format("expected '{} <count>'", keyword), tok.line_no);
    }
    const long n = parse_int(tok.tokens[1], tok.line_no);
    if (n < 0) throw ParseError(fmt::format("negative {} count", keyword), tok.line_no);
    return n;
}

} // namespace

Mesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(fmt::format("cannot open mesh file '{}'", path.string()), 0);
    Tokenizer tok{in, 0, {}};

    if (!tok.next()) throw ParseError("empty mesh file", tok.line_no);
    if (tok.tokens.size() != 2 || tok.tokens[0] != "dim") throw ParseError("expected 'dim <2|3>'", tok.line_no);
    const long dim = parse_int(tok.tokens[1], tok.line_no);
    if (dim != 2 && dim != 3) throw ParseError("dim must be 2 or 3", tok.line_no);

    const long n_nodes = parse_header(tok, "nodes");
    std::vector<Vec3> nodes;
    nodes.reserve(static_cast<std::size_t>(n_nodes));
    for (long i = 0; i < n_nodes; ++i) {
        if (!tok.next()) throw ParseError("unexpected end of file in node block", tok.line_no);
        if (tok.tokens.size() != static_cast<std::size_t>(dim)) {
            throw ParseError(fmt::format("node line needs {} coordinates", dim), tok.line_no);
        }
        Vec3 p = Vec3::Zero();
        for (long c = 0; c < dim; ++c) p[c] = parse_double(tok.tokens[static_cast<std::size_t>(c)], tok.line_no);
        nodes.push_back(p);
    }

    const long n_elements = parse_header(tok, "elements");
    std::vector<Element> elements;
    elements.reserve(static_cast<std::size_t>(n_elements));
    for (long i = 0; i < n_elements; ++i) {
        if (!tok.next()) throw ParseError("unexpected end of file in element block", tok.line_no);
        if (tok.tokens.size() != static_cast<std::size_t>(dim + 1)) {
            throw ParseError(fmt::format("element line needs {} indices", dim + 1), tok.line_no);
        }
        Element el{-1, -1, -1, -1};
        for (long v = 0; v <= dim; ++v) {
            const long idx = parse_int(tok.tokens[static_cast<std::size_t>(v)], tok.line_no);
            el[static_cast<std::size_t>(v)] = static_cast<int>(idx);
        }
        elements.push_back(el);
    }

    std::vector<double> sigma(elements.size(), 1.0);
    if (tok.next()) {
        if (tok.tokens.size() != 2 || tok.tokens[0] != "sigma") {
            throw ParseError("expected 'sigma <count>' or end of file", tok.line_no);
        }
        const long n_sigma = parse_int(tok.tokens[1], tok.line_no);
        if (n_sigma != n_elements) {
            throw ParseError(fmt::format("sigma count {} does not match element count {}", n_sigma, n_elements),
                             tok.line_no);
        }
        for (long i = 0; i < n_sigma; ++i) {
            if (!tok.next()) throw ParseError("unexpected end of file in sigma block", tok.line_no);
            if (tok.tokens.size() != 1) throw ParseError("sigma line needs one value", tok.line_no);
            sigma[static_cast<std::size_t>(i)] = parse_double(tok.tokens[0], tok.line_no);
        }
        if (tok.next()) throw ParseError("trailing content after sigma block", tok.line_no);
    }
    return Mesh(static_cast<int>(dim), std::move(nodes), std::move(elements), std::move(sigma));
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
    auto out = fmt::output_file(path.string());
    const int dim = mesh.dim();
    out.print("dim {}\nnodes {}\n", dim, mesh.node_count());
    for (const auto& p : mesh.nodes()) {
        if (dim == 2) out.print("{:.17g} {:.17g}\n", p.x(), p.y());
        else out.print("{:.17g} {:.17g} {:.17g}\n", p.x(), p.y(), p.z());
    }
    out.print("elements {}\n", mesh.element_count());
    for (const auto& el : mesh.elements()) {
        if (dim == 2) out.print("{} {} {}\n", el[0], el[1], el[2]);
        else out.print("{} {} {} {}\n", el[0], el[1], el[2], el[3]);
    }
    out.print("sigma {}\n", mesh.element_count());
    for (double s : mesh.conductivity()) out.print("{:.17g}\n", s);
}

} // namespace padeit
