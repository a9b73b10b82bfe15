#pragma once
#include <cmath>
#include <string>
#include <vector>
#include <gamsel/types.hpp>

namespace gamsel {

/// Raw predictors and response with optional variable names.
struct Dataset
{
    Mat X;
    Vec y;
    std::vector<std::string> names;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }

    void validate() const
    {
        if (y.size() != X.rows()) {
            throw InvalidInput("dataset: response has " + std::to_string(y.size()) + " rows, predictors have "
                               + std::to_string(X.rows()));
        }
        if (!names.empty() && static_cast<Index>(names.size()) != X.cols()) {
            throw InvalidInput("dataset: name count does not match predictor count");
        }
        if (!X.allFinite() || !y.allFinite()) throw InvalidInput("dataset: non-finite values");
    }

    std::string name(Index j) const
    {
        return names.empty() ? "x" + std::to_string(j + 1) : names[j];
    }
};

/// Column centers and 2-norm scales; constant columns are flagged and get scale 1.
struct Standardization
{
    Vec centers;
    Vec scales;
    std::vector<bool> constant;

    Index p() const { return centers.size(); }

    Mat apply(const Mat& X) const
    {
        if (X.cols() != p()) {
            throw InvalidInput("standardize: expected " + std::to_string(p()) + " predictors, got "
                               + std::to_string(X.cols()));
        }
        Mat out = X.rowwise() - centers.transpose();
        for (Index j = 0; j < p(); ++j) {
            if (constant[j]) out.col(j).setZero();
            else out.col(j) /= scales[j];
        }
        return out;
    }
};

/// Center each column, then divide by the centered column's 2-norm.
inline Standardization fit_standardization(const Mat& X)
{
    Standardization s;
    const Index p = X.cols();
    s.centers = X.colwise().mean().transpose();
    s.scales.resize(p);
    s.constant.assign(p, false);
    for (Index j = 0; j < p; ++j) {
        const double nrm = (X.col(j).array() - s.centers[j]).matrix().norm();
        const bool constant = X.rows() == 0 || (X.col(j).array() == X(0, j)).all() || !(nrm > 0.0);
        s.constant[j] = constant;
        s.scales[j] = constant ? 1.0 : nrm;
    }
    return s;
}

} // namespace gamsel
