#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "echoia/errors.hpp"
#include "echoia/window.hpp"

namespace echoia {

/// Per-dimension standardization fitted on training data. Degenerate
/// (zero-variance) dimensions keep std = 1 so constant sensors pass through.
struct Scaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

/// Fits mean/std per column (population std). Throws EmptyTrainingSet.
Scaler fit_scaler(const Eigen::MatrixXd& rows);

Eigen::VectorXd scale(const Scaler& s, const Eigen::VectorXd& v);
Eigen::MatrixXd scale_rows(const Scaler& s, const Eigen::MatrixXd& rows);

/// Linear soft-margin SVM. Only applied to vectors whose layout version
/// matches feature_set_version.
struct SvmModel {
    Eigen::VectorXd w;
    double b = 0.0;
    double c = 1.0;
    Scaler scaler;
    std::uint64_t feature_set_version = 0;
};

/// Labels: +1 legitimate, -1 illegitimate.
/// Trains by sequential minimal optimization on the dual with a linear
/// kernel; fully deterministic (no randomized pair selection). Throws
/// SingleClassTraining unless both labels are present.
SvmModel train_svm(const Eigen::MatrixXd& rows, const std::vector<int>& labels, double c,
                   std::uint64_t feature_set_version);

struct Prediction {
    double score = 0.0;
    bool legitimate = true; // score >= 0
};

/// score = w . scale(v) + b. Throws LayoutMismatch on version skew.
Prediction predict(const SvmModel& model, const WindowVector& v);
Prediction predict_scaled_free(const SvmModel& model, const Eigen::VectorXd& raw);

/// Primal objective 0.5*|w|^2 + C * sum max(0, 1 - y*(w.x + b)) and its
/// gradient where defined; x rows are assumed already standardized.
double hinge_objective(const Eigen::VectorXd& w, double b, double c, const Eigen::MatrixXd& rows,
                       const std::vector<int>& labels);
/// Gradient in (w, b); last component is d/db. At hinge kinks this is the
/// subgradient that treats the active constraint as violated.
Eigen::VectorXd hinge_gradient(const Eigen::VectorXd& w, double b, double c,
                               const Eigen::MatrixXd& rows, const std::vector<int>& labels);

struct CvPair {
    double c = 1.0;
    double delta = 3.0;
};

struct CvReport {
    std::vector<CvPair> grid;
    std::vector<std::vector<double>> fold_accuracies; // [pair][fold]
    std::size_t selected = 0;

    const CvPair& selected_pair() const { return grid[selected]; }
};

/// Accuracy of one (train-indices, validation-indices, pair) evaluation.
/// The closed-loop harness supplies an evaluator that replays the fold's
/// feedback log through the adaptation engine; unit tests may supply a plain
/// train/score evaluator.
using FoldEvaluator = std::function<double(const std::vector<std::int64_t>& train_idx,
                                           const std::vector<std::int64_t>& val_idx,
                                           const CvPair& pair)>;

/// k-fold cross-validation over contiguous time-ordered blocks. Evaluates
/// every grid pair, selects the best mean accuracy; ties break toward the
/// earlier grid entry (grids are listed smaller C, then smaller delta,
/// first). Throws InsufficientData when data_size < folds or folds < 2.
CvReport cross_validate(std::int64_t data_size, int folds, const std::vector<CvPair>& grid,
                        const FoldEvaluator& evaluate);

/// Versioned flat document round-trip for persistence and replay.
std::string model_to_json(const SvmModel& model);
SvmModel model_from_json(const std::string& text);

} // namespace echoia
