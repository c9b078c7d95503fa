#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace spectralnet {

// Rows index the true class, columns the predicted class.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<long long> counts;  // classes * classes

    explicit ConfusionMatrix(int c = 0)
        : classes(c), counts(static_cast<std::size_t>(c) * static_cast<std::size_t>(c), 0) {}

    long long& at(int truth, int pred) {
        return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes) +
                      static_cast<std::size_t>(pred)];
    }
    long long at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes) +
                      static_cast<std::size_t>(pred)];
    }
    void add(int truth, int pred) { ++at(truth, pred); }

    long long total() const {
        long long t = 0;
        for (long long v : counts) t += v;
        return t;
    }
    long long trace() const {
        long long t = 0;
        for (int k = 0; k < classes; ++k) t += at(k, k);
        return t;
    }
    long long row_sum(int k) const {
        long long t = 0;
        for (int j = 0; j < classes; ++j) t += at(k, j);
        return t;
    }
    long long col_sum(int k) const {
        long long t = 0;
        for (int i = 0; i < classes; ++i) t += at(i, k);
        return t;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
        if (other.classes != classes)
            throw std::invalid_argument("confusion matrix size mismatch in merge");
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
        return *this;
    }

    static ConfusionMatrix from_pairs(int classes,
                                      const std::vector<std::pair<int, int>>& truth_pred) {
        ConfusionMatrix cm(classes);
        for (auto [t, p] : truth_pred) cm.add(t, p);
        return cm;
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    long long support = 0;

    bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
    double overall_accuracy = 0.0;
    double average_accuracy = 0.0;  // mean recall over classes with support
    double kappa = 0.0;
    double test_loss = 0.0;
    std::vector<ClassMetrics> per_class;
    ClassMetrics macro_avg;     // unweighted mean over all classes
    ClassMetrics weighted_avg;  // support-weighted mean

    bool operator==(const MetricsReport&) const = default;
};

inline MetricsReport confusion_to_metrics(const ConfusionMatrix& cm, double test_loss = 0.0) {
    const long long n = cm.total();
    if (cm.classes < 1 || n < 1)
        throw std::invalid_argument("confusion_to_metrics: empty confusion matrix");
    const double dn = static_cast<double>(n);

    MetricsReport rep;
    rep.test_loss = test_loss;
    rep.overall_accuracy = static_cast<double>(cm.trace()) / dn;

    double pe = 0.0;
    for (int k = 0; k < cm.classes; ++k)
        pe += static_cast<double>(cm.row_sum(k)) / dn * (static_cast<double>(cm.col_sum(k)) / dn);
    // pe == 1 only when all mass sits in one diagonal cell: perfect agreement
    rep.kappa = std::abs(1.0 - pe) < 1e-15 ? 1.0 : (rep.overall_accuracy - pe) / (1.0 - pe);

    double recall_sum = 0.0;
    int present = 0;
    for (int k = 0; k < cm.classes; ++k) {
        ClassMetrics m;
        m.support = cm.row_sum(k);
        const long long col = cm.col_sum(k), diag = cm.at(k, k);
        m.precision = col > 0 ? static_cast<double>(diag) / static_cast<double>(col) : 0.0;
        m.recall = m.support > 0 ? static_cast<double>(diag) / static_cast<double>(m.support) : 0.0;
        m.f1 = m.precision + m.recall > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        if (m.support > 0) {
            recall_sum += m.recall;
            ++present;
        }
        rep.macro_avg.precision += m.precision;
        rep.macro_avg.recall += m.recall;
        rep.macro_avg.f1 += m.f1;
        rep.weighted_avg.precision += static_cast<double>(m.support) * m.precision;
        rep.weighted_avg.recall += static_cast<double>(m.support) * m.recall;
        rep.weighted_avg.f1 += static_cast<double>(m.support) * m.f1;
        rep.per_class.push_back(m);
    }
    rep.average_accuracy = recall_sum / static_cast<double>(present);
    const double c = static_cast<double>(cm.classes);
    rep.macro_avg.precision /= c;
    rep.macro_avg.recall /= c;
    rep.macro_avg.f1 /= c;
    rep.macro_avg.support = n;
    rep.weighted_avg.precision /= dn;
    rep.weighted_avg.recall /= dn;
    rep.weighted_avg.f1 /= dn;
    rep.weighted_avg.support = n;
    return rep;
}

namespace detail {

inline std::string fmt(double v, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

}  // namespace detail

// Plain-text table: one row per class with precision/recall/f1/support,
// then accuracy, macro avg, weighted avg, test loss, and the three
// headline percentages.
inline std::string render_report(const MetricsReport& rep,
                                 const std::vector<std::string>& class_names) {
    if (class_names.size() != rep.per_class.size())
        throw std::invalid_argument("render_report: " + std::to_string(class_names.size()) +
                                    " class names for " + std::to_string(rep.per_class.size()) +
                                    " classes");

    std::size_t width = std::string("Overall accuracy (%)").size();
    for (const auto& name : class_names) width = std::max(width, name.size());

    std::string out;
    auto pad = [&](const std::string& s) {
        out += s;
        out.append(width - s.size() + 2, ' ');
    };
    auto cell = [&](const std::string& s) {
        if (s.size() < 11) out.append(11 - s.size(), ' ');
        out += s;
    };
    auto row = [&](const std::string& name, const std::string& p, const std::string& r,
                   const std::string& f, const std::string& s) {
        pad(name);
        cell(p);
        cell(r);
        cell(f);
        cell(s);
        out += '\n';
    };

    row("", "precision", "recall", "f1-score", "support");
    out += '\n';
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        const ClassMetrics& m = rep.per_class[k];
        row(class_names[k], detail::fmt(m.precision), detail::fmt(m.recall), detail::fmt(m.f1),
            std::to_string(m.support));
    }
    out += '\n';
    row("accuracy", "", "", detail::fmt(rep.overall_accuracy),
        std::to_string(rep.macro_avg.support));
    row("macro avg", detail::fmt(rep.macro_avg.precision), detail::fmt(rep.macro_avg.recall),
        detail::fmt(rep.macro_avg.f1), std::to_string(rep.macro_avg.support));
    row("weighted avg", detail::fmt(rep.weighted_avg.precision),
        detail::fmt(rep.weighted_avg.recall), detail::fmt(rep.weighted_avg.f1),
        std::to_string(rep.weighted_avg.support));
    out += '\n';
    row("Test loss", "", "", "", detail::fmt(rep.test_loss));
    row("Average accuracy (%)", "", "", "", detail::fmt(100.0 * rep.average_accuracy, 2));
    row("Kappa accuracy (%)", "", "", "", detail::fmt(100.0 * rep.kappa, 2));
    row("Overall accuracy (%)", "", "", "", detail::fmt(100.0 * rep.overall_accuracy, 2));
    return out;
}

inline nlohmann::json report_to_json(const MetricsReport& rep) {
    nlohmann::json j;
    j["overall_accuracy"] = rep.overall_accuracy;
    j["average_accuracy"] = rep.average_accuracy;
    j["kappa"] = rep.kappa;
    j["test_loss"] = rep.test_loss;
    auto dump = [](const ClassMetrics& m) {
        return nlohmann::json{{"precision", m.precision},
                              {"recall", m.recall},
                              {"f1", m.f1},
                              {"support", m.support}};
    };
    j["classes"] = nlohmann::json::array();
    for (const ClassMetrics& m : rep.per_class) j["classes"].push_back(dump(m));
    j["macro_avg"] = dump(rep.macro_avg);
    j["weighted_avg"] = dump(rep.weighted_avg);
    return j;
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport rep;
    rep.overall_accuracy = j.at("overall_accuracy").get<double>();
    rep.average_accuracy = j.at("average_accuracy").get<double>();
    rep.kappa = j.at("kappa").get<double>();
    rep.test_loss = j.at("test_loss").get<double>();
    auto parse = [](const nlohmann::json& v) {
        ClassMetrics m;
        m.precision = v.at("precision").get<double>();
        m.recall = v.at("recall").get<double>();
        m.f1 = v.at("f1").get<double>();
        m.support = v.at("support").get<long long>();
        return m;
    };
    for (const auto& v : j.at("classes")) rep.per_class.push_back(parse(v));
    rep.macro_avg = parse(j.at("macro_avg"));
    rep.weighted_avg = parse(j.at("weighted_avg"));
    return rep;
}

inline std::string confusion_to_csv(const ConfusionMatrix& cm,
                                    const std::vector<std::string>& class_names) {
    if (static_cast<int>(class_names.size()) != cm.classes)
        throw std::invalid_argument("confusion_to_csv: class name count mismatch");
    std::string out = "true\\predicted";
    for (const auto& name : class_names) out += "," + name;
    out += '\n';
    for (int i = 0; i < cm.classes; ++i) {
        out += class_names[i];
        for (int j = 0; j < cm.classes; ++j) out += "," + std::to_string(cm.at(i, j));
        out += '\n';
    }
    return out;
}

// 1-based "Class 1".."Class C" when no dataset-specific names are known.
inline std::vector<std::string> default_class_names(int classes) {
    std::vector<std::string> names;
    for (int c = 1; c <= classes; ++c) names.push_back("Class " + std::to_string(c));
    return names;
}

}  // namespace spectralnet
