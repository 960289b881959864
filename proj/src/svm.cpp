#include "echoia/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace echoia {

Scaler fit_scaler(const Eigen::MatrixXd& rows) {
    if (rows.rows() == 0) {
        throw EmptyTrainingSet();
    }
    Scaler s;
    s.mean = rows.colwise().mean();
    Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
    Eigen::VectorXd var = centered.array().square().colwise().mean();
    s.std = var.cwiseSqrt();
    for (Eigen::Index i = 0; i < s.std.size(); ++i) {
        if (s.std(i) < 1e-12) {
            s.std(i) = 1.0; // degenerate dimension passes through
        }
    }
    return s;
}

Eigen::VectorXd scale(const Scaler& s, const Eigen::VectorXd& v) {
    return (v - s.mean).cwiseQuotient(s.std);
}

Eigen::MatrixXd scale_rows(const Scaler& s, const Eigen::MatrixXd& rows) {
    return (rows.rowwise() - s.mean.transpose()).array().rowwise() /
           s.std.transpose().array();
}

namespace {

// Deterministic sequential minimal optimization on the dual, linear kernel.
// Pair selection follows the classic two-loop heuristic with index order in
// place of randomization, so identical inputs give identical models.
class SmoSolver {
public:
    SmoSolver(const Eigen::MatrixXd& x, const std::vector<int>& y, double c)
        : x_(x), y_(y), c_(c), n_(x.rows()) {
        gram_ = x_ * x_.transpose();
        alpha_ = Eigen::VectorXd::Zero(n_);
        errors_.resize(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            errors_(i) = -static_cast<double>(y_[static_cast<std::size_t>(i)]);
        }
    }

    void solve() {
        long budget = 100000 + 1000 * static_cast<long>(n_);
        bool examine_all = true;
        int changed = 0;
        while ((changed > 0 || examine_all) && budget > 0) {
            changed = 0;
            for (Eigen::Index i = 0; i < n_; ++i) {
                if (examine_all || is_free(i)) {
                    changed += examine(i);
                    if (--budget <= 0) {
                        break;
                    }
                }
            }
            if (examine_all) {
                examine_all = false;
            } else if (changed == 0) {
                examine_all = true;
            }
        }
    }

    Eigen::VectorXd weights() const {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(x_.cols());
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (alpha_(i) > 0.0) {
                w += alpha_(i) * y_[static_cast<std::size_t>(i)] * x_.row(i).transpose();
            }
        }
        return w;
    }

    double bias() const { return b_; }

private:
    static constexpr double kTol = 1e-6;  // KKT tolerance
    static constexpr double kEps = 1e-12; // minimal alpha step

    bool is_free(Eigen::Index i) const { return alpha_(i) > 0.0 && alpha_(i) < c_; }

    int examine(Eigen::Index i2) {
        const double y2 = y_[static_cast<std::size_t>(i2)];
        const double e2 = errors_(i2);
        const double r2 = e2 * y2;
        if (!((r2 < -kTol && alpha_(i2) < c_) || (r2 > kTol && alpha_(i2) > 0.0))) {
            return 0;
        }
        // best |E1 - E2| over free multipliers first
        Eigen::Index best = -1;
        double best_gap = -1.0;
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (is_free(i)) {
                const double gap = std::abs(errors_(i) - e2);
                if (gap > best_gap) {
                    best_gap = gap;
                    best = i;
                }
            }
        }
        if (best >= 0 && take_step(best, i2)) {
            return 1;
        }
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (is_free(i) && take_step(i, i2)) {
                return 1;
            }
        }
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (take_step(i, i2)) {
                return 1;
            }
        }
        return 0;
    }

    bool take_step(Eigen::Index i1, Eigen::Index i2) {
        if (i1 == i2) {
            return false;
        }
        const double a1_old = alpha_(i1);
        const double a2_old = alpha_(i2);
        const double y1 = y_[static_cast<std::size_t>(i1)];
        const double y2 = y_[static_cast<std::size_t>(i2)];
        const double e1 = errors_(i1);
        const double e2 = errors_(i2);
        const double s = y1 * y2;

        double lo;
        double hi;
        if (y1 != y2) {
            lo = std::max(0.0, a2_old - a1_old);
            hi = std::min(c_, c_ + a2_old - a1_old);
        } else {
            lo = std::max(0.0, a1_old + a2_old - c_);
            hi = std::min(c_, a1_old + a2_old);
        }
        if (lo >= hi) {
            return false;
        }

        const double k11 = gram_(i1, i1);
        const double k12 = gram_(i1, i2);
        const double k22 = gram_(i2, i2);
        const double eta = k11 + k22 - 2.0 * k12;

        double a2;
        if (eta > 0.0) {
            a2 = a2_old + y2 * (e1 - e2) / eta;
            a2 = std::clamp(a2, lo, hi);
        } else {
            // flat direction: evaluate the dual objective at both clip ends
            const double f1 = y1 * e1 - a1_old * k11 - s * a2_old * k12;
            const double f2 = y2 * e2 - s * a1_old * k12 - a2_old * k22;
            const double l1 = a1_old + s * (a2_old - lo);
            const double h1 = a1_old + s * (a2_old - hi);
            const double obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 +
                                  0.5 * lo * lo * k22 + s * lo * l1 * k12;
            const double obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 +
                                  0.5 * hi * hi * k22 + s * hi * h1 * k12;
            if (obj_lo < obj_hi - kEps) {
                a2 = lo;
            } else if (obj_lo > obj_hi + kEps) {
                a2 = hi;
            } else {
                a2 = a2_old;
            }
        }
        if (std::abs(a2 - a2_old) < kEps * (a2 + a2_old + kEps)) {
            return false;
        }
        const double a1 = a1_old + s * (a2_old - a2);

        const double da1 = a1 - a1_old;
        const double da2 = a2 - a2_old;
        double b_new;
        const double b1 = b_ - e1 - y1 * da1 * k11 - y2 * da2 * k12;
        const double b2 = b_ - e2 - y1 * da1 * k12 - y2 * da2 * k22;
        if (a1 > 0.0 && a1 < c_) {
            b_new = b1;
        } else if (a2 > 0.0 && a2 < c_) {
            b_new = b2;
        } else {
            b_new = 0.5 * (b1 + b2);
        }

        const double db = b_new - b_;
        alpha_(i1) = a1;
        alpha_(i2) = a2;
        b_ = b_new;
        errors_ += y1 * da1 * gram_.col(i1) + y2 * da2 * gram_.col(i2);
        errors_.array() += db;
        return true;
    }

    const Eigen::MatrixXd& x_;
    const std::vector<int>& y_;
    double c_;
    Eigen::Index n_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd alpha_;
    Eigen::VectorXd errors_; // E_i = f(x_i) - y_i
    double b_ = 0.0;
};

} // namespace

SvmModel train_svm(const Eigen::MatrixXd& rows, const std::vector<int>& labels, double c,
                   std::uint64_t feature_set_version) {
    if (rows.rows() == 0 || static_cast<std::size_t>(rows.rows()) != labels.size()) {
        throw EmptyTrainingSet("train_svm: empty or mismatched training set");
    }
    if (c <= 0.0) {
        throw Error("train_svm: C must be positive");
    }
    const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), -1) != labels.end();
    if (!has_pos || !has_neg) {
        throw SingleClassTraining();
    }

    SvmModel model;
    model.c = c;
    model.feature_set_version = feature_set_version;
    model.scaler = fit_scaler(rows);
    const Eigen::MatrixXd x = scale_rows(model.scaler, rows);

    SmoSolver solver(x, labels, c);
    solver.solve();
    model.w = solver.weights();

    // For fixed w the objective is piecewise linear and convex in b with
    // breakpoints at y_i - w.x_i; SMO's running bias is only exact when a
    // free support vector pins it, so refine b over the breakpoints.
    const Eigen::VectorXd wx = x * model.w;
    auto loss_at = [&](double b) {
        double loss = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double y = labels[static_cast<std::size_t>(i)];
            loss += std::max(0.0, 1.0 - y * (wx(i) + b));
        }
        return loss;
    };
    double best_b = solver.bias();
    double best_loss = loss_at(best_b);
    std::vector<double> candidates(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        candidates[static_cast<std::size_t>(i)] =
            labels[static_cast<std::size_t>(i)] - wx(i);
    }
    std::sort(candidates.begin(), candidates.end());
    for (double b : candidates) {
        const double loss = loss_at(b);
        if (loss < best_loss - 1e-12) {
            best_loss = loss;
            best_b = b;
        }
    }
    model.b = best_b;
    return model;
}

Prediction predict(const SvmModel& model, const WindowVector& v) {
    if (v.layout_version != model.feature_set_version) {
        throw LayoutMismatch("window layout version does not match model");
    }
    if (v.values.size() != model.w.size()) {
        throw LayoutMismatch("window dimensionality does not match model");
    }
    Prediction p;
    p.score = model.w.dot(scale(model.scaler, v.values)) + model.b;
    p.legitimate = p.score >= 0.0;
    return p;
}

Prediction predict_scaled_free(const SvmModel& model, const Eigen::VectorXd& raw) {
    Prediction p;
    p.score = model.w.dot(scale(model.scaler, raw)) + model.b;
    p.legitimate = p.score >= 0.0;
    return p;
}

double hinge_objective(const Eigen::VectorXd& w, double b, double c, const Eigen::MatrixXd& rows,
                       const std::vector<int>& labels) {
    double obj = 0.5 * w.squaredNorm();
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const double margin =
            labels[static_cast<std::size_t>(i)] * (rows.row(i).dot(w) + b);
        obj += c * std::max(0.0, 1.0 - margin);
    }
    return obj;
}

Eigen::VectorXd hinge_gradient(const Eigen::VectorXd& w, double b, double c,
                               const Eigen::MatrixXd& rows, const std::vector<int>& labels) {
    Eigen::VectorXd grad(w.size() + 1);
    grad.head(w.size()) = w;
    grad(w.size()) = 0.0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const double y = labels[static_cast<std::size_t>(i)];
        const double margin = y * (rows.row(i).dot(w) + b);
        if (margin < 1.0) {
            grad.head(w.size()) -= c * y * rows.row(i).transpose();
            grad(w.size()) -= c * y;
        }
    }
    return grad;
}

CvReport cross_validate(std::int64_t data_size, int folds, const std::vector<CvPair>& grid,
                        const FoldEvaluator& evaluate) {
    if (folds < 2 || data_size < folds) {
        throw InsufficientData("cross_validate: need folds >= 2 and data_size >= folds");
    }
    if (grid.empty()) {
        throw Error("cross_validate: empty grid");
    }

    // contiguous time-ordered blocks
    std::vector<std::pair<std::int64_t, std::int64_t>> blocks;
    for (int f = 0; f < folds; ++f) {
        const std::int64_t lo = data_size * f / folds;
        const std::int64_t hi = data_size * (f + 1) / folds;
        blocks.emplace_back(lo, hi);
    }

    CvReport report;
    report.grid = grid;
    report.fold_accuracies.assign(grid.size(), {});
    for (std::size_t p = 0; p < grid.size(); ++p) {
        for (int f = 0; f < folds; ++f) {
            std::vector<std::int64_t> train_idx;
            std::vector<std::int64_t> val_idx;
            for (std::int64_t i = 0; i < data_size; ++i) {
                if (i >= blocks[static_cast<std::size_t>(f)].first &&
                    i < blocks[static_cast<std::size_t>(f)].second) {
                    val_idx.push_back(i);
                } else {
                    train_idx.push_back(i);
                }
            }
            report.fold_accuracies[p].push_back(evaluate(train_idx, val_idx, grid[p]));
        }
    }

    std::vector<double> means(grid.size(), 0.0);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        for (double a : report.fold_accuracies[p]) {
            means[p] += a;
        }
        means[p] /= static_cast<double>(folds);
    }
    // max mean; ties break toward smaller C, then smaller delta, then the
    // earlier grid entry (so duplicate pairs keep their first occurrence)
    std::size_t sel = 0;
    for (std::size_t p = 1; p < grid.size(); ++p) {
        if (means[p] > means[sel] + 1e-15) {
            sel = p;
        } else if (std::abs(means[p] - means[sel]) <= 1e-15) {
            if (grid[p].c < grid[sel].c - 1e-15 ||
                (std::abs(grid[p].c - grid[sel].c) <= 1e-15 &&
                 grid[p].delta < grid[sel].delta - 1e-15)) {
                sel = p;
            }
        }
    }
    report.selected = sel;
    return report;
}

std::string model_to_json(const SvmModel& model) {
    nlohmann::json j;
    j["format"] = "echoia-svm";
    j["format_version"] = 1;
    j["w"] = std::vector<double>(model.w.data(), model.w.data() + model.w.size());
    j["b"] = model.b;
    j["c"] = model.c;
    j["mean"] =
        std::vector<double>(model.scaler.mean.data(), model.scaler.mean.data() + model.scaler.mean.size());
    j["std"] =
        std::vector<double>(model.scaler.std.data(), model.scaler.std.data() + model.scaler.std.size());
    j["feature_set_version"] = model.feature_set_version;
    return j.dump();
}

SvmModel model_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "echoia-svm") {
        throw MalformedPayload("not an echoia-svm document");
    }
    SvmModel m;
    const auto w = j.at("w").get<std::vector<double>>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    m.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.scaler.mean =
        Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.scaler.std = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    m.b = j.at("b").get<double>();
    m.c = j.at("c").get<double>();
    m.feature_set_version = j.at("feature_set_version").get<std::uint64_t>();
    return m;
}

} // namespace echoia
