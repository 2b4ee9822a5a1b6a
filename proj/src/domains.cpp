#include "cdfsl/domains.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cdfsl/rng.hpp"

namespace cdfsl {

Tensor identity_matrix(int n) {
    Tensor t = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor rotation_matrix(int dim, double angle_deg) {
    double a = angle_deg * std::numbers::pi / 180.0;
    double c = std::cos(a), s = std::sin(a);
    Tensor r = identity_matrix(dim);
    // compose Givens rotations on pairs (0,1), (2,3), ...
    for (int i = 0; i + 1 < dim; i += 2) {
        r.at(i, i) = c;
        r.at(i, i + 1) = -s;
        r.at(i + 1, i) = s;
        r.at(i + 1, i + 1) = c;
    }
    return r;
}

Tensor random_prototypes(int num_classes, int dim, double proto_scale, std::uint64_t seed) {
    Rng rng(seed);
    Tensor p = Tensor::zeros({num_classes, dim});
    for (double& v : p.values) v = proto_scale * rng.normal();
    return p;
}

Tensor random_basis(int dim, int rank, std::uint64_t seed) {
    if (rank < 1 || rank > dim) throw std::invalid_argument("random_basis: rank must be in [1, dim]");
    Rng rng(seed);
    Tensor b = Tensor::zeros({dim, rank});
    for (int k = 0; k < rank; ++k) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        for (int j = 0; j < k; ++j) {
            double dot = 0.0;
            for (int i = 0; i < dim; ++i) dot += v[i] * b.at(i, j);
            for (int i = 0; i < dim; ++i) v[i] -= dot * b.at(i, j);
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw std::invalid_argument("random_basis: degenerate draw");
        for (int i = 0; i < dim; ++i) b.at(i, k) = v[i] / norm;
    }
    return b;
}

Tensor subspace_prototypes(int num_classes, const Tensor& basis, double proto_scale,
                           std::uint64_t seed) {
    int dim = basis.rows();
    int rank = basis.cols();
    Rng rng(seed);
    double coord_scale = proto_scale * std::sqrt(static_cast<double>(dim) / rank);
    Tensor p = Tensor::zeros({num_classes, dim});
    for (int c = 0; c < num_classes; ++c) {
        for (int k = 0; k < rank; ++k) {
            double u = coord_scale * rng.normal();
            for (int i = 0; i < dim; ++i) p.at(c, i) += u * basis.at(i, k);
        }
    }
    return p;
}

namespace {

void apply_transform(const DomainSpec& spec, const std::vector<double>& in, double* out) {
    int d = spec.in_dim();
    for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) acc += spec.rotation.at(i, j) * in[j];
        out[i] = spec.scale[i] * acc + spec.shift[i];
    }
}

}  // namespace

SampleTable synth_dataset(const DomainSpec& spec, int per_class, std::uint64_t seed) {
    if (per_class < 1) throw std::invalid_argument("synth_dataset: per_class must be >= 1");
    int d = spec.in_dim();
    if (static_cast<int>(spec.scale.size()) != d || static_cast<int>(spec.shift.size()) != d ||
        spec.rotation.rows() != d || spec.rotation.cols() != d)
        throw std::invalid_argument("synth_dataset: transform dimensions do not match prototypes");

    SampleTable t;
    t.num_classes = spec.num_classes();
    t.x = Tensor::zeros({t.num_classes * per_class, d});
    t.labels.resize(static_cast<std::size_t>(t.num_classes) * per_class);
    std::vector<double> raw(d);
    int row = 0;
    for (int c = 0; c < t.num_classes; ++c) {
        Rng rng(derive_seed(seed, "class", static_cast<std::uint64_t>(c)));
        for (int k = 0; k < per_class; ++k, ++row) {
            for (int j = 0; j < d; ++j) raw[j] = spec.prototypes.at(c, j) + spec.sigma_class * rng.normal();
            apply_transform(spec, raw, &t.x.values[static_cast<std::size_t>(row) * d]);
            t.labels[row] = c + spec.label_offset;
        }
    }
    return t;
}

DomainStats domain_stats(const Tensor& samples) {
    int n = samples.rows(), d = samples.cols();
    if (n < 2) throw std::invalid_argument("domain_stats: need at least 2 samples");
    DomainStats s;
    s.mu.assign(d, 0.0);
    s.sigma.assign(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) s.mu[j] += samples.at(i, j);
    for (int j = 0; j < d; ++j) s.mu[j] /= n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            double dv = samples.at(i, j) - s.mu[j];
            s.sigma[j] += dv * dv;
        }
    for (int j = 0; j < d; ++j) s.sigma[j] = std::sqrt(s.sigma[j] / n);
    return s;
}

Tensor make_pseudo_unseen(const Tensor& x_v, double lambda, const DomainStats& stats, std::uint64_t seed) {
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("make_pseudo_unseen: lambda outside [0,1]");
    int d = x_v.cols();
    if (static_cast<int>(stats.mu.size()) != d)
        throw std::invalid_argument("make_pseudo_unseen: stats dimension mismatch");
    if (lambda == 1.0) return x_v;  // bit-exact identity
    Rng rng(seed);
    Tensor out = x_v;
    for (int i = 0; i < x_v.rows(); ++i)
        for (int j = 0; j < d; ++j) {
            double eps = stats.mu[j] + stats.sigma[j] * rng.normal();
            out.at(i, j) = lambda * x_v.at(i, j) + (1.0 - lambda) * eps;
        }
    return out;
}

Episode sample_episode(const SampleTable& table, int way, int shot, int query_per_class, std::uint64_t seed) {
    int d = table.x.cols();
    // group row indices by label
    std::vector<int> label_values;
    std::vector<std::vector<int>> by_class;
    for (std::size_t r = 0; r < table.labels.size(); ++r) {
        int y = table.labels[r];
        auto it = std::find(label_values.begin(), label_values.end(), y);
        std::size_t ci;
        if (it == label_values.end()) {
            label_values.push_back(y);
            by_class.emplace_back();
            ci = by_class.size() - 1;
        } else {
            ci = static_cast<std::size_t>(it - label_values.begin());
        }
        by_class[ci].push_back(static_cast<int>(r));
    }
    if (static_cast<int>(by_class.size()) < way)
        throw std::invalid_argument("sample_episode: table has fewer classes than way count");

    Rng rng(seed);
    std::vector<int> class_order(by_class.size());
    for (std::size_t i = 0; i < class_order.size(); ++i) class_order[i] = static_cast<int>(i);
    rng.shuffle(class_order);

    Episode ep;
    ep.way = way;
    ep.shot = shot;
    ep.query_per_class = query_per_class;
    ep.support_x = Tensor::zeros({way * shot, d});
    ep.query_x = Tensor::zeros({way * query_per_class, d});
    int srow = 0, qrow = 0;
    for (int n = 0; n < way; ++n) {
        auto rows = by_class[class_order[n]];
        if (static_cast<int>(rows.size()) < shot + query_per_class)
            throw std::invalid_argument("sample_episode: class has fewer than shot+query samples");
        rng.shuffle(rows);
        for (int k = 0; k < shot; ++k, ++srow) {
            std::copy_n(&table.x.values[static_cast<std::size_t>(rows[k]) * d], d,
                        &ep.support_x.values[static_cast<std::size_t>(srow) * d]);
            ep.support_y.push_back(n);
        }
        for (int q = 0; q < query_per_class; ++q, ++qrow) {
            std::copy_n(&table.x.values[static_cast<std::size_t>(rows[shot + q]) * d], d,
                        &ep.query_x.values[static_cast<std::size_t>(qrow) * d]);
            ep.query_y.push_back(n);
        }
    }
    return ep;
}

double solve_assignment(const std::vector<std::vector<double>>& cost) {
    int n = static_cast<int>(cost.size());
    if (n == 0) return 0.0;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j)
                if (!used[j]) {
                    double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
    return total;
}

double emd(const Tensor& a, const Tensor& b, int size_cap) {
    if (a.rows() != b.rows()) throw std::invalid_argument("emd: point sets must have equal size");
    if (a.cols() != b.cols()) throw std::invalid_argument("emd: point dimension mismatch");
    if (a.rows() > size_cap) throw std::invalid_argument("emd: set size exceeds cap");
    int n = a.rows(), d = a.cols();
    if (n == 0) return 0.0;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                double dv = a.at(i, k) - b.at(j, k);
                s += dv * dv;
            }
            cost[i][j] = std::sqrt(s);
        }
    return solve_assignment(cost) / n;
}

void save_table_csv(const SampleTable& table, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_table_csv: cannot open " + path.string());
    int d = table.x.cols();
    f << "class";
    for (int j = 0; j < d; ++j) f << ",x" << j;
    f << "\n";
    char buf[64];
    for (int i = 0; i < table.x.rows(); ++i) {
        f << table.labels[i];
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", table.x.at(i, j));
            f << "," << buf;
        }
        f << "\n";
    }
}

SampleTable load_table_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_table_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("load_table_csv: empty file " + path.string());
    int d = static_cast<int>(std::count(line.begin(), line.end(), ','));

    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        labels.push_back(std::stoi(cell));
        for (int j = 0; j < d; ++j) {
            std::getline(ss, cell, ',');
            values.push_back(std::stod(cell));
        }
    }
    SampleTable t;
    t.x = Tensor({static_cast<int>(labels.size()), d}, std::move(values));
    t.labels = std::move(labels);
    std::vector<int> uniq = t.labels;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    t.num_classes = static_cast<int>(uniq.size());
    return t;
}

}  // namespace cdfsl
