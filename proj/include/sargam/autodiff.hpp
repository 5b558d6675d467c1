#pragma once

#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace sargam::ad {

using Mat = Eigen::MatrixXd;

// A trainable matrix with its gradient accumulator and Adam state.
struct Param {
    Mat value;
    Mat grad;
    Mat adam_m;
    Mat adam_v;

    explicit Param(Mat v = {})
        : value(std::move(v)) {
        grad = Mat::Zero(value.rows(), value.cols());
        adam_m = Mat::Zero(value.rows(), value.cols());
        adam_v = Mat::Zero(value.rows(), value.cols());
    }

    void zero_grad() { grad.setZero(); }
};

// Reverse-mode tape over dense matrices. One tape per forward pass;
// backward() accumulates into the Params registered via param().
class Tape {
public:
    int constant(Mat v);
    int param(Param& p);

    int matmul(int a, int b);
    int matmul_nt(int a, int b); // A * B^T
    int add(int a, int b);
    int add_rowvec(int a, int bias); // bias is 1 x cols, added to each row
    int scale(int a, double s);
    int relu(int a);
    int softmax_rows(int a);
    int layernorm_rows(int x, int gain, int bias); // gain/bias are 1 x cols
    int rows(int a, std::vector<int> idx);         // gather rows
    int hcat(int a, int b);
    int slice_cols(int a, int c0, int n);
    int dropout(int a, double p, std::mt19937_64& rng);
    // Mean over rows of (logsumexp(row) - row[target]); scalar output.
    int cross_entropy_rows(int logits, std::vector<int> targets);

    const Mat& value(int id) const { return nodes_[size_t(id)].val; }
    void backward(int id);

private:
    struct Node {
        Mat val;
        Mat grad;
        std::function<void(Tape&, Node&)> back;
        Param* sink = nullptr;
    };

    std::vector<Node> nodes_;

    int push(Mat v, std::function<void(Tape&, Node&)> back = nullptr);
    Mat& grad_of(int id);

    friend struct NodeAccess;
};

} // namespace sargam::ad
