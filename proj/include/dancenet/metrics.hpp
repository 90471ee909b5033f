#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dancenet {

// counts(c, g): points predicted as c whose ground truth is g.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  std::size_t classes() const { return classes_; }
  std::uint64_t operator()(std::size_t predicted, std::size_t truth) const {
    return counts_[predicted * classes_ + truth];
  }
  void add(std::size_t predicted, std::size_t truth, std::uint64_t n = 1);
  void merge(const ConfusionMatrix& other);
  std::uint64_t total() const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> truth,
                                 std::size_t classes);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Scores {
  double overall_accuracy = 0.0;
  std::vector<ClassScores> per_class;
  double average_f1 = 0.0;
};

// Undefined ratios (zero denominators) are reported as 0.
double f1_score(double precision, double recall);
Scores scores(const ConfusionMatrix& cm);

// Confusion matrix normalized per ground-truth column with precision,
// recall and F1 rows appended.
void write_score_table(std::ostream& out, const ConfusionMatrix& cm, const Scores& s,
                       std::span<const std::string> class_names = {});
// "class,precision,recall,f1" rows plus overall_accuracy and average_f1.
void write_score_csv(std::ostream& out, const Scores& s, std::span<const std::string> class_names = {});

}  // namespace dancenet
