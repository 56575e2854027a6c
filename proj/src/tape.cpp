#include "dimml/tape.hpp"

#include <cmath>
#include <utility>

#include "dimml/errors.hpp"

namespace dimml {

Tensor GradMap::grad(const Var& leaf) const {
    auto it = grads_.find(leaf.node);
    if (leaf.node < 0 || it == grads_.end()) {
        return leaf.value.rank() == 0 ? Tensor::scalar(0.0) : Tensor::zeros(leaf.value.shape());
    }
    return it->second;
}

bool GradMap::has(const Var& leaf) const {
    return leaf.node >= 0 && grads_.count(leaf.node) > 0;
}

Var Tape::leaf(Tensor value) {
    int id = push_node(nullptr);
    leaves_.push_back(id);
    return Var{std::move(value), id};
}

int Tape::push_node(PullFn pull) {
    nodes_.push_back(Node{std::move(pull)});
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int node, Tensor g) {
    Tensor& slot = adjoint_[static_cast<std::size_t>(node)];
    if (!slot.defined()) {
        slot = std::move(g);
        return;
    }
    for (std::size_t i = 0; i < slot.numel(); ++i) {
        slot[i] += g[i];
    }
}

GradMap Tape::backward(const Var& loss) {
    if (!loss.value.defined() || loss.value.numel() != 1) {
        throw validation_error("backward: loss must be a scalar tensor");
    }
    adjoint_.assign(nodes_.size(), Tensor{});
    if (loss.tracked()) {
        adjoint_[static_cast<std::size_t>(loss.node)] =
            loss.value.rank() == 0 ? Tensor::scalar(1.0) : Tensor::full(loss.value.shape(), 1.0);
        for (int i = loss.node; i >= 0; --i) {
            const Tensor& g = adjoint_[static_cast<std::size_t>(i)];
            if (!g.defined()) continue;
            if (nodes_[static_cast<std::size_t>(i)].pull) {
                nodes_[static_cast<std::size_t>(i)].pull(*this, g);
            }
        }
    }
    GradMap gm;
    for (int id : leaves_) {
        Tensor& g = adjoint_[static_cast<std::size_t>(id)];
        if (g.defined()) {
            gm.grads_.emplace(id, std::move(g));
        }
    }
    adjoint_.clear();
    return gm;
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value.same_shape(b.value)) {
        throw validation_error(std::string(op) + ": shape mismatch " + a.value.shape_str() +
                               " vs " + b.value.shape_str());
    }
}

}  // namespace

Var Tape::add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a.value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value[i];
    if (!a.tracked() && !b.tracked()) return constant(std::move(out));
    int an = a.node, bn = b.node;
    int id = push_node([an, bn](Tape& t, const Tensor& g) {
        if (an >= 0) t.accumulate(an, g);
        if (bn >= 0) t.accumulate(bn, g);
    });
    return Var{std::move(out), id};
}

Var Tape::sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a.value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value[i];
    if (!a.tracked() && !b.tracked()) return constant(std::move(out));
    int an = a.node, bn = b.node;
    int id = push_node([an, bn](Tape& t, const Tensor& g) {
        if (an >= 0) t.accumulate(an, g);
        if (bn >= 0) {
            Tensor ng = g;
            for (std::size_t i = 0; i < ng.numel(); ++i) ng[i] = -ng[i];
            t.accumulate(bn, std::move(ng));
        }
    });
    return Var{std::move(out), id};
}

Var Tape::mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a.value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value[i];
    if (!a.tracked() && !b.tracked()) return constant(std::move(out));
    int an = a.node, bn = b.node;
    Tensor av = a.value, bv = b.value;
    int id = push_node([an, bn, av, bv](Tape& t, const Tensor& g) {
        if (an >= 0) {
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] *= bv[i];
            t.accumulate(an, std::move(ga));
        }
        if (bn >= 0) {
            Tensor gb = g;
            for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] *= av[i];
            t.accumulate(bn, std::move(gb));
        }
    });
    return Var{std::move(out), id};
}

Var Tape::scale(const Var& a, double c) {
    Tensor out = a.value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    if (!a.tracked()) return constant(std::move(out));
    int an = a.node;
    int id = push_node([an, c](Tape& t, const Tensor& g) {
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] *= c;
        t.accumulate(an, std::move(ga));
    });
    return Var{std::move(out), id};
}

Var Tape::relu(const Var& a) {
    Tensor out = a.value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    if (!a.tracked()) return constant(std::move(out));
    int an = a.node;
    Tensor av = a.value;
    int id = push_node([an, av](Tape& t, const Tensor& g) {
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.numel(); ++i) {
            if (av[i] <= 0.0) ga[i] = 0.0;
        }
        t.accumulate(an, std::move(ga));
    });
    return Var{std::move(out), id};
}

Var Tape::matmul(const Var& a, const Var& b) {
    if (a.value.rank() != 2 || b.value.rank() != 2 || a.value.cols() != b.value.rows()) {
        throw validation_error("matmul: incompatible shapes " + a.value.shape_str() + " x " +
                               b.value.shape_str());
    }
    int m = a.value.rows(), k = a.value.cols(), n = b.value.cols();
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            double av = a.value.at(i, p);
            for (int j = 0; j < n; ++j) {
                out.at(i, j) += av * b.value.at(p, j);
            }
        }
    }
    if (!a.tracked() && !b.tracked()) return constant(std::move(out));
    int an = a.node, bn = b.node;
    Tensor av = a.value, bv = b.value;
    int id = push_node([an, bn, av, bv, m, k, n](Tape& t, const Tensor& g) {
        if (an >= 0) {  // dA = g * B^T
            Tensor ga = Tensor::zeros({m, k});
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    double gv = g.at(i, j);
                    for (int p = 0; p < k; ++p) {
                        ga.at(i, p) += gv * bv.at(p, j);
                    }
                }
            }
            t.accumulate(an, std::move(ga));
        }
        if (bn >= 0) {  // dB = A^T * g
            Tensor gb = Tensor::zeros({k, n});
            for (int i = 0; i < m; ++i) {
                for (int p = 0; p < k; ++p) {
                    double avv = av.at(i, p);
                    for (int j = 0; j < n; ++j) {
                        gb.at(p, j) += avv * g.at(i, j);
                    }
                }
            }
            t.accumulate(bn, std::move(gb));
        }
    });
    return Var{std::move(out), id};
}

Var Tape::transpose(const Var& a) {
    if (a.value.rank() != 2) {
        throw validation_error("transpose: expects rank-2 tensor, got " + a.value.shape_str());
    }
    int m = a.value.rows(), n = a.value.cols();
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(j, i) = a.value.at(i, j);
    }
    if (!a.tracked()) return constant(std::move(out));
    int an = a.node;
    int id = push_node([an, m, n](Tape& t, const Tensor& g) {
        Tensor ga = Tensor::zeros({m, n});
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < m; ++i) ga.at(i, j) = g.at(j, i);
        }
        t.accumulate(an, std::move(ga));
    });
    return Var{std::move(out), id};
}

Var Tape::add_rowvec(const Var& x, const Var& bias) {
    if (x.value.rank() != 2 || bias.value.rank() != 1 || x.value.cols() != bias.value.shape()[0]) {
        throw validation_error("add_rowvec: incompatible shapes " + x.value.shape_str() + " + " +
                               bias.value.shape_str());
    }
    int b = x.value.rows(), d = x.value.cols();
    Tensor out = x.value;
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < d; ++j) out.at(i, j) += bias.value[static_cast<std::size_t>(j)];
    }
    if (!x.tracked() && !bias.tracked()) return constant(std::move(out));
    int xn = x.node, bn = bias.node;
    int id = push_node([xn, bn, b, d](Tape& t, const Tensor& g) {
        if (xn >= 0) t.accumulate(xn, g);
        if (bn >= 0) {
            Tensor gb = Tensor::zeros({d});
            for (int i = 0; i < b; ++i) {
                for (int j = 0; j < d; ++j) gb[static_cast<std::size_t>(j)] += g.at(i, j);
            }
            t.accumulate(bn, std::move(gb));
        }
    });
    return Var{std::move(out), id};
}

Var Tape::sum_all(const Var& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.value.numel(); ++i) s += a.value[i];
    Tensor out = Tensor::scalar(s);
    if (!a.tracked()) return constant(std::move(out));
    int an = a.node;
    std::vector<int> shape = a.value.shape();
    int id = push_node([an, shape](Tape& t, const Tensor& g) {
        t.accumulate(an, Tensor::full(shape, g[0]));
    });
    return Var{std::move(out), id};
}

Var Tape::mean_all(const Var& a) {
    if (a.value.numel() == 0) {
        throw validation_error("mean_all: empty tensor");
    }
    double inv = 1.0 / static_cast<double>(a.value.numel());
    double s = 0.0;
    for (std::size_t i = 0; i < a.value.numel(); ++i) s += a.value[i];
    Tensor out = Tensor::scalar(s * inv);
    if (!a.tracked()) return constant(std::move(out));
    int an = a.node;
    std::vector<int> shape = a.value.shape();
    int id = push_node([an, shape, inv](Tape& t, const Tensor& g) {
        t.accumulate(an, Tensor::full(shape, g[0] * inv));
    });
    return Var{std::move(out), id};
}

Var Tape::select_labels(const Var& m, const std::vector<int>& labels) {
    if (m.value.rank() != 2) {
        throw validation_error("select_labels: expects rank-2 tensor");
    }
    int b = m.value.rows(), k = m.value.cols();
    if (static_cast<int>(labels.size()) != b) {
        throw validation_error("select_labels: label count does not match rows");
    }
    for (int y : labels) {
        if (y < 0 || y >= k) {
            throw validation_error("select_labels: label " + std::to_string(y) +
                                   " out of range [0, " + std::to_string(k) + ")");
        }
    }
    Tensor out = Tensor::zeros({b});
    for (int i = 0; i < b; ++i) out[static_cast<std::size_t>(i)] = m.value.at(i, labels[static_cast<std::size_t>(i)]);
    if (!m.tracked()) return constant(std::move(out));
    int mn = m.node;
    std::vector<int> ys = labels;
    int id = push_node([mn, ys, b, k](Tape& t, const Tensor& g) {
        Tensor gm = Tensor::zeros({b, k});
        for (int i = 0; i < b; ++i) gm.at(i, ys[static_cast<std::size_t>(i)]) = g[static_cast<std::size_t>(i)];
        t.accumulate(mn, std::move(gm));
    });
    return Var{std::move(out), id};
}

Var Tape::select_cols(const Var& x, const std::vector<int>& dims) {
    if (x.value.rank() != 2) {
        throw validation_error("select_cols: expects rank-2 tensor");
    }
    int b = x.value.rows(), d = x.value.cols();
    int s = static_cast<int>(dims.size());
    if (s == 0) {
        throw validation_error("select_cols: empty column list");
    }
    for (int m : dims) {
        if (m < 0 || m >= d) {
            throw validation_error("select_cols: column " + std::to_string(m) + " out of range");
        }
    }
    Tensor out = Tensor::zeros({b, s});
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < s; ++j) out.at(i, j) = x.value.at(i, dims[static_cast<std::size_t>(j)]);
    }
    if (!x.tracked()) return constant(std::move(out));
    int xn = x.node;
    std::vector<int> ds = dims;
    int id = push_node([xn, ds, b, d, s](Tape& t, const Tensor& g) {
        Tensor gx = Tensor::zeros({b, d});
        for (int i = 0; i < b; ++i) {
            for (int j = 0; j < s; ++j) gx.at(i, ds[static_cast<std::size_t>(j)]) += g.at(i, j);
        }
        t.accumulate(xn, std::move(gx));
    });
    return Var{std::move(out), id};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw validation_error("concat_cols: no inputs");
    }
    int b = parts[0].value.rank() == 2 ? parts[0].value.rows() : -1;
    int total = 0;
    bool tracked = false;
    for (const Var& p : parts) {
        if (p.value.rank() != 2 || p.value.rows() != b) {
            throw validation_error("concat_cols: ragged shapes");
        }
        total += p.value.cols();
        tracked = tracked || p.tracked();
    }
    Tensor out = Tensor::zeros({b, total});
    int off = 0;
    for (const Var& p : parts) {
        for (int i = 0; i < b; ++i) {
            for (int j = 0; j < p.value.cols(); ++j) out.at(i, off + j) = p.value.at(i, j);
        }
        off += p.value.cols();
    }
    if (!tracked) return constant(std::move(out));
    std::vector<int> nodes, widths;
    for (const Var& p : parts) {
        nodes.push_back(p.node);
        widths.push_back(p.value.cols());
    }
    int id = push_node([nodes, widths, b](Tape& t, const Tensor& g) {
        int off2 = 0;
        for (std::size_t p = 0; p < nodes.size(); ++p) {
            if (nodes[p] >= 0) {
                Tensor gp = Tensor::zeros({b, widths[p]});
                for (int i = 0; i < b; ++i) {
                    for (int j = 0; j < widths[p]; ++j) gp.at(i, j) = g.at(i, off2 + j);
                }
                t.accumulate(nodes[p], std::move(gp));
            }
            off2 += widths[p];
        }
    });
    return Var{std::move(out), id};
}

Var Tape::diag(const Var& m) {
    if (m.value.rank() != 2 || m.value.rows() != m.value.cols()) {
        throw validation_error("diag: expects a square rank-2 tensor");
    }
    int n = m.value.rows();
    Tensor out = Tensor::zeros({n});
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = m.value.at(i, i);
    if (!m.tracked()) return constant(std::move(out));
    int mn = m.node;
    int id = push_node([mn, n](Tape& t, const Tensor& g) {
        Tensor gm = Tensor::zeros({n, n});
        for (int i = 0; i < n; ++i) gm.at(i, i) = g[static_cast<std::size_t>(i)];
        t.accumulate(mn, std::move(gm));
    });
    return Var{std::move(out), id};
}

Var Tape::log_softmax(const Var& logits) {
    if (logits.value.rank() != 2) {
        throw validation_error("log_softmax: expects rank-2 tensor");
    }
    Tensor out = dimml::log_softmax(logits.value);
    if (!logits.tracked()) return constant(std::move(out));
    int ln = logits.node;
    int b = logits.value.rows(), k = logits.value.cols();
    Tensor outv = out;
    int id = push_node([ln, outv, b, k](Tape& t, const Tensor& g) {
        // dz = g - softmax(z) * rowsum(g)
        Tensor gz = g;
        for (int i = 0; i < b; ++i) {
            double rowsum = 0.0;
            for (int j = 0; j < k; ++j) rowsum += g.at(i, j);
            for (int j = 0; j < k; ++j) {
                gz.at(i, j) -= std::exp(outv.at(i, j)) * rowsum;
            }
        }
        t.accumulate(ln, std::move(gz));
    });
    return Var{std::move(out), id};
}

Var Tape::pairwise_dist(const Var& a, const Var& b) {
    if (a.value.rank() != 2 || b.value.rank() != 2 || a.value.cols() != b.value.cols()) {
        throw validation_error("pairwise_dist: incompatible shapes " + a.value.shape_str() +
                               " vs " + b.value.shape_str());
    }
    int n = a.value.rows(), m = b.value.rows(), s = a.value.cols();
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            double sq = 0.0;
            for (int p = 0; p < s; ++p) {
                double diff = a.value.at(i, p) - b.value.at(j, p);
                sq += diff * diff;
            }
            out.at(i, j) = std::sqrt(sq);
        }
    }
    if (!a.tracked() && !b.tracked()) return constant(std::move(out));
    int an = a.node, bn = b.node;
    Tensor av = a.value, bv = b.value, dv = out;
    int id = push_node([an, bn, av, bv, dv, n, m, s](Tape& t, const Tensor& g) {
        Tensor ga = an >= 0 ? Tensor::zeros({n, s}) : Tensor{};
        Tensor gb = bn >= 0 ? Tensor::zeros({m, s}) : Tensor{};
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) {
                double dist = dv.at(i, j);
                if (dist <= 0.0) continue;
                double coef = g.at(i, j) / dist;
                for (int p = 0; p < s; ++p) {
                    double diff = coef * (av.at(i, p) - bv.at(j, p));
                    if (an >= 0) ga.at(i, p) += diff;
                    if (bn >= 0) gb.at(j, p) -= diff;
                }
            }
        }
        if (an >= 0) t.accumulate(an, std::move(ga));
        if (bn >= 0) t.accumulate(bn, std::move(gb));
    });
    return Var{std::move(out), id};
}

}  // namespace dimml
