#include "dancenet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "dancenet/error.hpp"

namespace dancenet {

namespace {

std::string class_label(std::span<const std::string> names, std::size_t c) {
  if (c < names.size()) return names[c];
  return "class" + std::to_string(c);
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) fail(ErrorCode::kConfig, "confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::size_t predicted, std::size_t truth, std::uint64_t n) {
  if (predicted >= classes_ || truth >= classes_) {
    fail(ErrorCode::kLabel, "confusion matrix label out of range");
  }
  counts_[predicted * classes_ + truth] += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) fail(ErrorCode::kShape, "confusion matrices differ in class count");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> truth,
                                 std::size_t classes) {
  if (predicted.size() != truth.size()) {
    fail(ErrorCode::kSize, "confusion_matrix: " + std::to_string(predicted.size()) + " predictions for " +
                               std::to_string(truth.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 0 || truth[i] < 0) fail(ErrorCode::kLabel, "negative label in confusion_matrix");
    cm.add(static_cast<std::size_t>(predicted[i]), static_cast<std::size_t>(truth[i]));
  }
  return cm;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Scores scores(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) fail(ErrorCode::kEmptyInput, "scores: empty confusion matrix");
  const std::size_t k = cm.classes();
  Scores s;
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < k; ++c) trace += cm(c, c);
  s.overall_accuracy = static_cast<double>(trace) / static_cast<double>(total);
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t predicted_c = 0, truth_c = 0;
    for (std::size_t o = 0; o < k; ++o) {
      predicted_c += cm(c, o);
      truth_c += cm(o, c);
    }
    const double tp = static_cast<double>(cm(c, c));
    ClassScores cs;
    cs.precision = predicted_c > 0 ? tp / static_cast<double>(predicted_c) : 0.0;
    cs.recall = truth_c > 0 ? tp / static_cast<double>(truth_c) : 0.0;
    cs.f1 = f1_score(cs.precision, cs.recall);
    f1_sum += cs.f1;
    s.per_class.push_back(cs);
  }
  s.average_f1 = f1_sum / static_cast<double>(k);
  return s;
}

void write_score_table(std::ostream& out, const ConfusionMatrix& cm, const Scores& s,
                       std::span<const std::string> class_names) {
  const std::size_t k = cm.classes();
  std::size_t width = 10;
  for (std::size_t c = 0; c < k; ++c) width = std::max(width, class_label(class_names, c).size() + 1);
  auto cell = [&](const std::string& text) {
    out << text;
    for (std::size_t i = text.size(); i < width; ++i) out << ' ';
  };
  cell("");
  for (std::size_t g = 0; g < k; ++g) cell(class_label(class_names, g));
  out << '\n';
  for (std::size_t p = 0; p < k; ++p) {
    cell(class_label(class_names, p));
    for (std::size_t g = 0; g < k; ++g) {
      std::uint64_t col = 0;
      for (std::size_t o = 0; o < k; ++o) col += cm(o, g);
      cell(fixed3(col > 0 ? static_cast<double>(cm(p, g)) / static_cast<double>(col) : 0.0));
    }
    out << '\n';
  }
  const char* rows[] = {"Precision", "Recall", "F1 score"};
  for (int r = 0; r < 3; ++r) {
    cell(rows[r]);
    for (std::size_t c = 0; c < k; ++c) {
      const ClassScores& cs = s.per_class[c];
      cell(fixed3(r == 0 ? cs.precision : r == 1 ? cs.recall : cs.f1));
    }
    out << '\n';
  }
  out << "Overall accuracy: " << fixed3(s.overall_accuracy) << '\n';
  out << "Average F1: " << fixed3(s.average_f1) << '\n';
}

void write_score_csv(std::ostream& out, const Scores& s, std::span<const std::string> class_names) {
  out << "class,precision,recall,f1\n";
  for (std::size_t c = 0; c < s.per_class.size(); ++c) {
    const ClassScores& cs = s.per_class[c];
    out << class_label(class_names, c) << ',' << cs.precision << ',' << cs.recall << ',' << cs.f1 << '\n';
  }
  out << "overall_accuracy,,," << s.overall_accuracy << '\n';
  out << "average_f1,,," << s.average_f1 << '\n';
}

}  // namespace dancenet
