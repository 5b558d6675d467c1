#include "sargam/autodiff.hpp"

#include <cmath>

#include "sargam/errors.hpp"

namespace sargam::ad {

int Tape::push(Mat v, std::function<void(Tape&, Node&)> back) {
    Node n;
    n.val = std::move(v);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::grad_of(int id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.size() == 0)
        n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    return n.grad;
}

int Tape::constant(Mat v) { return push(std::move(v)); }

int Tape::param(Param& p) {
    int id = push(p.value);
    nodes_[size_t(id)].sink = &p;
    return id;
}

int Tape::matmul(int a, int b) {
    Mat v = value(a) * value(b);
    return push(std::move(v), [a, b](Tape& t, Node& n) {
        t.grad_of(a).noalias() += n.grad * t.value(b).transpose();
        t.grad_of(b).noalias() += t.value(a).transpose() * n.grad;
    });
}

int Tape::matmul_nt(int a, int b) {
    Mat v = value(a) * value(b).transpose();
    return push(std::move(v), [a, b](Tape& t, Node& n) {
        t.grad_of(a).noalias() += n.grad * t.value(b);
        t.grad_of(b).noalias() += n.grad.transpose() * t.value(a);
    });
}

int Tape::add(int a, int b) {
    Mat v = value(a) + value(b);
    return push(std::move(v), [a, b](Tape& t, Node& n) {
        t.grad_of(a) += n.grad;
        t.grad_of(b) += n.grad;
    });
}

int Tape::add_rowvec(int a, int bias) {
    Mat v = value(a);
    v.rowwise() += value(bias).row(0);
    return push(std::move(v), [a, bias](Tape& t, Node& n) {
        t.grad_of(a) += n.grad;
        t.grad_of(bias).row(0) += n.grad.colwise().sum();
    });
}

int Tape::scale(int a, double s) {
    Mat v = value(a) * s;
    return push(std::move(v), [a, s](Tape& t, Node& n) {
        t.grad_of(a) += n.grad * s;
    });
}

int Tape::relu(int a) {
    Mat v = value(a).cwiseMax(0.0);
    return push(std::move(v), [a](Tape& t, Node& n) {
        const Mat& x = t.value(a);
        t.grad_of(a).array() +=
            n.grad.array() * (x.array() > 0.0).cast<double>();
    });
}

int Tape::softmax_rows(int a) {
    Mat v = value(a);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        double mx = v.row(r).maxCoeff();
        v.row(r) = (v.row(r).array() - mx).exp();
        v.row(r) /= v.row(r).sum();
    }
    int out = push(std::move(v), [a](Tape& t, Node& n) {
        const Mat& y = n.val;
        Mat dx = n.grad;
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            double dot = n.grad.row(r).dot(y.row(r));
            dx.row(r) =
                (n.grad.row(r).array() - dot) * y.row(r).array();
        }
        t.grad_of(a) += dx;
    });
    return out;
}

int Tape::layernorm_rows(int x, int gain, int bias) {
    constexpr double eps = 1e-5;
    const Mat& xv = value(x);
    const Eigen::Index c = xv.cols();
    Mat xhat(xv.rows(), c);
    Eigen::VectorXd sigma(xv.rows());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        double mu = xv.row(r).mean();
        double var = (xv.row(r).array() - mu).square().mean();
        double sd = std::sqrt(var + eps);
        sigma(r) = sd;
        xhat.row(r) = (xv.row(r).array() - mu) / sd;
    }
    Mat v = xhat;
    v.array().rowwise() *= value(gain).row(0).array();
    v.rowwise() += value(bias).row(0);
    return push(std::move(v),
                [x, gain, bias, xhat = std::move(xhat),
                 sigma = std::move(sigma)](Tape& t, Node& n) {
                    const Mat& g = t.value(gain);
                    Mat dxh = n.grad;
                    dxh.array().rowwise() *= g.row(0).array();
                    Mat dx(dxh.rows(), dxh.cols());
                    for (Eigen::Index r = 0; r < dxh.rows(); ++r) {
                        double m1 = dxh.row(r).mean();
                        double m2 =
                            (dxh.row(r).array() * xhat.row(r).array())
                                .mean();
                        dx.row(r) = (dxh.row(r).array() - m1 -
                                     xhat.row(r).array() * m2) /
                                    sigma(r);
                    }
                    t.grad_of(x) += dx;
                    t.grad_of(gain).row(0) +=
                        (n.grad.array() * xhat.array())
                            .colwise()
                            .sum()
                            .matrix();
                    t.grad_of(bias).row(0) += n.grad.colwise().sum();
                });
}

int Tape::rows(int a, std::vector<int> idx) {
    const Mat& av = value(a);
    Mat v(static_cast<Eigen::Index>(idx.size()), av.cols());
    for (size_t i = 0; i < idx.size(); ++i)
        v.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
    return push(std::move(v),
                [a, idx = std::move(idx)](Tape& t, Node& n) {
                    Mat& da = t.grad_of(a);
                    for (size_t i = 0; i < idx.size(); ++i)
                        da.row(idx[i]) +=
                            n.grad.row(static_cast<Eigen::Index>(i));
                });
}

int Tape::hcat(int a, int b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    Mat v(av.rows(), av.cols() + bv.cols());
    v << av, bv;
    Eigen::Index ca = av.cols();
    return push(std::move(v), [a, b, ca](Tape& t, Node& n) {
        t.grad_of(a) += n.grad.leftCols(ca);
        t.grad_of(b) += n.grad.rightCols(n.grad.cols() - ca);
    });
}

int Tape::slice_cols(int a, int c0, int nc) {
    Mat v = value(a).middleCols(c0, nc);
    return push(std::move(v), [a, c0, nc](Tape& t, Node& n) {
        t.grad_of(a).middleCols(c0, nc) += n.grad;
    });
}

int Tape::dropout(int a, double p, std::mt19937_64& rng) {
    if (p <= 0.0)
        return a;
    std::bernoulli_distribution keep(1.0 - p);
    const Mat& av = value(a);
    Mat mask(av.rows(), av.cols());
    double inv = 1.0 / (1.0 - p);
    for (Eigen::Index r = 0; r < av.rows(); ++r)
        for (Eigen::Index c = 0; c < av.cols(); ++c)
            mask(r, c) = keep(rng) ? inv : 0.0;
    Mat v = av.cwiseProduct(mask);
    return push(std::move(v), [a, mask = std::move(mask)](Tape& t, Node& n) {
        t.grad_of(a) += n.grad.cwiseProduct(mask);
    });
}

int Tape::cross_entropy_rows(int logits, std::vector<int> targets) {
    const Mat& L = value(logits);
    if (static_cast<size_t>(L.rows()) != targets.size())
        throw ArgumentError("cross_entropy_rows: target count mismatch");
    const double nrows = static_cast<double>(L.rows());
    Mat probs(L.rows(), L.cols());
    double loss = 0.0;
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
        double mx = L.row(r).maxCoeff();
        Eigen::ArrayXd e = (L.row(r).array() - mx).exp();
        double z = e.sum();
        probs.row(r) = (e / z).matrix();
        loss += std::log(z) + mx - L(r, targets[size_t(r)]);
    }
    loss /= nrows;
    Mat v(1, 1);
    v(0, 0) = loss;
    return push(std::move(v),
                [logits, targets = std::move(targets),
                 probs = std::move(probs), nrows](Tape& t, Node& n) {
                    double g = n.grad(0, 0) / nrows;
                    Mat d = probs * g;
                    for (Eigen::Index r = 0; r < d.rows(); ++r)
                        d(r, targets[size_t(r)]) -= g;
                    t.grad_of(logits) += d;
                });
}

void Tape::backward(int id) {
    grad_of(id).setConstant(1.0);
    for (int i = id; i >= 0; --i) {
        Node& n = nodes_[size_t(i)];
        if (n.grad.size() == 0)
            continue; // never contributed to the loss
        if (n.back)
            n.back(*this, n);
        if (n.sink)
            n.sink->grad += n.grad;
    }
}

} // namespace sargam::ad
