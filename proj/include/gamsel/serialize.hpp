#pragma once
#include <cmath>
#include <limits>
#include <string>
#include <vector>
#include <json.hpp>
#include <gamsel/model.hpp>

namespace gamsel {

inline constexpr const char* kModelFormat = "gamsel-model";
inline constexpr int kModelVersion = 1;

namespace detail {

using json = nlohmann::json;

inline json num(double v)
{
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double get_num(const json& j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw FormatError("model file: unexpected string '" + s + "' where a number was expected");
    }
    return j.get<double>();
}

inline json vec(const Vec& v)
{
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
    return a;
}

inline Vec get_vec(const json& j)
{
    Vec v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = get_num(j.at(i));
    return v;
}

inline json mat(const Mat& m)
{
    json o;
    o["rows"] = m.rows();
    o["cols"] = m.cols();
    o["data"] = vec(Eigen::Map<const Vec>(m.data(), m.size())); // column-major
    return o;
}

inline Mat get_mat(const json& j)
{
    const Index r = j.at("rows").get<Index>(), c = j.at("cols").get<Index>();
    const Vec d = get_vec(j.at("data"));
    if (d.size() != r * c) throw FormatError("model file: matrix data length does not match its shape");
    return Eigen::Map<const Mat>(d.data(), r, c);
}

inline json config_json(const GamselConfig& c)
{
    json o;
    o["gamma"] = c.gamma;
    o["degree"] = c.degree;
    o["df"] = c.df;
    o["degrees"] = c.degrees;
    o["dfs"] = c.dfs;
    o["num_lambda"] = c.num_lambda;
    o["lambda_min_ratio"] = c.lambda_min_ratio;
    o["lambda"] = c.lambda;
    o["append_zero"] = c.append_zero;
    o["family"] = to_string(c.family);
    o["variant"] = to_string(c.variant);
    o["lambda_max_rule"] = c.lambda_max_rule == LambdaMaxRule::kExact ? "exact" : "printed";
    o["tol"] = c.tol;
    o["kkt_tol"] = c.kkt_tol;
    o["max_sweeps"] = c.max_sweeps;
    o["strong_rules"] = c.strong_rules;
    o["classify_tol"] = c.classify_tol;
    o["middle_tol"] = c.middle_tol;
    o["max_middle"] = c.max_middle;
    o["threads"] = c.threads;
    return o;
}

inline GamselConfig get_config(const json& o)
{
    GamselConfig c;
    c.gamma = o.at("gamma").get<double>();
    c.degree = o.at("degree").get<Index>();
    c.df = o.at("df").get<double>();
    c.degrees = o.at("degrees").get<std::vector<Index>>();
    c.dfs = o.at("dfs").get<std::vector<double>>();
    c.num_lambda = o.at("num_lambda").get<Index>();
    c.lambda_min_ratio = o.at("lambda_min_ratio").get<double>();
    c.lambda = o.at("lambda").get<std::vector<double>>();
    c.append_zero = o.at("append_zero").get<bool>();
    c.family = family_from_string(o.at("family").get<std::string>());
    c.variant = variant_from_string(o.at("variant").get<std::string>());
    c.lambda_max_rule = o.at("lambda_max_rule").get<std::string>() == "printed" ? LambdaMaxRule::kPrinted
                                                                                 : LambdaMaxRule::kExact;
    c.tol = o.at("tol").get<double>();
    c.kkt_tol = o.at("kkt_tol").get<double>();
    c.max_sweeps = o.at("max_sweeps").get<Index>();
    c.strong_rules = o.at("strong_rules").get<bool>();
    c.classify_tol = o.at("classify_tol").get<double>();
    c.middle_tol = o.at("middle_tol").get<double>();
    c.max_middle = o.at("max_middle").get<Index>();
    c.threads = o.at("threads").get<Index>();
    return c;
}

inline json term_json(const TermInfo& t)
{
    json o;
    o["variant"] = to_string(t.map.variant);
    o["recurrence"] = {{"shift", vec(t.map.recurrence.shift)}, {"offdiag", vec(t.map.recurrence.offdiag)}};
    o["transform"] = mat(t.map.transform);
    if (t.map.q_fit.knots.size() > 0) {
        o["q_fit"] = {{"knots", vec(t.map.q_fit.knots)},
                      {"values", mat(t.map.q_fit.values)},
                      {"second_derivs", mat(t.map.q_fit.second_derivs)}};
    }
    o["D"] = vec(t.D);
    o["psi"] = num(t.psi);
    o["constant"] = t.constant;
    o["k"] = t.k;
    o["df"] = t.df;
    o["scale_applied"] = t.scale_applied;
    return o;
}

inline TermInfo get_term(const json& o)
{
    TermInfo t;
    t.map.variant = variant_from_string(o.at("variant").get<std::string>());
    t.map.recurrence.shift = get_vec(o.at("recurrence").at("shift"));
    t.map.recurrence.offdiag = get_vec(o.at("recurrence").at("offdiag"));
    t.map.transform = get_mat(o.at("transform"));
    if (o.contains("q_fit")) {
        const auto& q = o.at("q_fit");
        t.map.q_fit.knots = get_vec(q.at("knots"));
        t.map.q_fit.values = get_mat(q.at("values"));
        t.map.q_fit.second_derivs = get_mat(q.at("second_derivs"));
    }
    t.D = get_vec(o.at("D"));
    t.psi = get_num(o.at("psi"));
    t.constant = o.at("constant").get<bool>();
    t.k = o.at("k").get<Index>();
    t.df = o.at("df").get<double>();
    t.scale_applied = o.at("scale_applied").get<double>();
    if (t.map.transform.cols() != t.D.size()) throw FormatError("model file: transform and penalty sizes disagree");
    return t;
}

inline json point_json(const PathPoint& p)
{
    json o;
    o["lambda"] = p.lambda;
    o["alpha0"] = p.state.alpha0;
    o["alpha"] = vec(p.state.alpha);
    json b = json::array();
    for (const auto& v : p.state.beta) b.push_back(vec(v));
    o["beta"] = b;
    json cls = json::array();
    for (auto c : p.classes) cls.push_back(to_string(c));
    o["classes"] = cls;
    o["term_df"] = vec(p.term_df);
    o["deviance"] = p.deviance;
    o["diagnostics"] = {{"sweeps", p.diagnostics.sweeps},
                        {"kkt_rounds", p.diagnostics.kkt_rounds},
                        {"kkt_max", p.diagnostics.kkt_max},
                        {"middle_iterations", p.diagnostics.middle_iterations},
                        {"middle_capped", p.diagnostics.middle_capped},
                        {"nll_trace", p.diagnostics.nll_trace}};
    return o;
}

inline PathPoint get_point(const json& o)
{
    PathPoint p;
    p.lambda = o.at("lambda").get<double>();
    p.state.alpha0 = o.at("alpha0").get<double>();
    p.state.alpha = get_vec(o.at("alpha"));
    for (const auto& b : o.at("beta")) p.state.beta.push_back(get_vec(b));
    for (const auto& c : o.at("classes")) p.classes.push_back(term_class_from_string(c.get<std::string>()));
    p.term_df = get_vec(o.at("term_df"));
    p.deviance = o.at("deviance").get<double>();
    const auto& d = o.at("diagnostics");
    p.diagnostics.sweeps = d.at("sweeps").get<Index>();
    p.diagnostics.kkt_rounds = d.at("kkt_rounds").get<Index>();
    p.diagnostics.kkt_max = d.at("kkt_max").get<double>();
    p.diagnostics.middle_iterations = d.at("middle_iterations").get<Index>();
    p.diagnostics.middle_capped = d.at("middle_capped").get<bool>();
    p.diagnostics.nll_trace = d.at("nll_trace").get<std::vector<double>>();
    return p;
}

} // namespace detail

/// Self-describing JSON document for a fitted path.
inline std::string serialize(const GamselPath& path)
{
    using detail::json;
    json o;
    o["format"] = kModelFormat;
    o["version"] = kModelVersion;
    o["config"] = detail::config_json(path.config);
    o["names"] = path.names;
    json st;
    st["centers"] = detail::vec(path.standardization.centers);
    st["scales"] = detail::vec(path.standardization.scales);
    st["constant"] = path.standardization.constant;
    o["standardization"] = st;
    json terms = json::array();
    for (const auto& t : path.terms) terms.push_back(detail::term_json(t));
    o["terms"] = terms;
    o["lambda_max"] = path.lambda_max;
    json pts = json::array();
    for (const auto& p : path.points) pts.push_back(detail::point_json(p));
    o["points"] = pts;
    o["warnings"] = path.warnings;
    return o.dump(1);
}

inline GamselPath deserialize(const std::string& text)
{
    using detail::json;
    json o;
    try {
        o = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file: not valid JSON (") + e.what() + ")");
    }
    try {
        if (!o.is_object() || o.value("format", std::string()) != kModelFormat) {
            throw FormatError("model file: not a gamsel model");
        }
        const int version = o.at("version").get<int>();
        if (version != kModelVersion) {
            throw FormatError("model file: unsupported version " + std::to_string(version) + " (expected "
                              + std::to_string(kModelVersion) + ")");
        }
        GamselPath path;
        path.config = detail::get_config(o.at("config"));
        path.names = o.at("names").get<std::vector<std::string>>();
        const auto& st = o.at("standardization");
        path.standardization.centers = detail::get_vec(st.at("centers"));
        path.standardization.scales = detail::get_vec(st.at("scales"));
        path.standardization.constant = st.at("constant").get<std::vector<bool>>();
        for (const auto& t : o.at("terms")) path.terms.push_back(detail::get_term(t));
        path.lambda_max = o.at("lambda_max").get<double>();
        for (const auto& p : o.at("points")) path.points.push_back(detail::get_point(p));
        path.warnings = o.at("warnings").get<std::vector<std::string>>();

        const Index p = path.p();
        if (static_cast<Index>(path.names.size()) != p || path.standardization.centers.size() != p
            || path.standardization.scales.size() != p || static_cast<Index>(path.standardization.constant.size()) != p) {
            throw FormatError("model file: inconsistent variable counts");
        }
        for (const auto& pt : path.points) {
            if (pt.state.alpha.size() != p || static_cast<Index>(pt.state.beta.size()) != p
                || static_cast<Index>(pt.classes.size()) != p) {
                throw FormatError("model file: path point has wrong variable count");
            }
            for (Index j = 0; j < p; ++j) {
                if (pt.state.beta[j].size() != path.terms[j].m()) throw FormatError("model file: coefficient block size mismatch");
            }
        }
        return path;
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(std::string("model file: ") + e.what());
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file: corrupt payload (") + e.what() + ")");
    }
}

} // namespace gamsel
