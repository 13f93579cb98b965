#include "gsocc/metrics.hpp"

#include <algorithm>

#include <string>

#include "gsocc/errors.hpp"
#include "gsocc/parallel.hpp"

namespace gsocc {

ConfusionMatrix::ConfusionMatrix(std::size_t class_count)
    : classes_(class_count), counts_(class_count * class_count, 0) {
  if (class_count == 0) throw InvalidArgumentError("confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
  std::uint64_t col = 0;
  for (std::size_t t = 0; t < classes_; ++t) col += at(t, c);
  return col - at(c, c);
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
  std::uint64_t row = 0;
  for (std::size_t p = 0; p < classes_; ++p) row += at(c, p);
  return row - at(c, c);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const std::uint64_t c : counts_) n += c;
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
  return *this;
}

ConfusionMatrix confusion(const OccupancyGrid& pred, const OccupancyGrid& truth, int threads) {
  if (!(pred.spec == truth.spec)) throw ShapeError("prediction and truth grid specs differ");
  if (pred.class_count != truth.class_count) {
    throw ShapeError("prediction has " + std::to_string(pred.class_count) +
                     " classes, truth has " + std::to_string(truth.class_count));
  }
  if (pred.labels.size() != truth.labels.size()) throw ShapeError("label buffers differ in size");

  const std::size_t classes = truth.class_count;
  const std::size_t n = truth.labels.size();
  const int workers = resolve_thread_count(threads);
  const std::size_t shards = std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(n, 1));
  std::vector<ConfusionMatrix> partial(shards, ConfusionMatrix(classes));

  parallel_for(shards, static_cast<int>(shards), [&](std::size_t sb, std::size_t se) {
    for (std::size_t s = sb; s < se; ++s) {
      ConfusionMatrix& cm = partial[s];
      for (std::size_t v = n * s / shards; v < n * (s + 1) / shards; ++v) {
        const std::uint8_t t = truth.labels[v];
        const std::uint8_t p = pred.labels[v];
        if (t == kIgnoreLabel) {
          cm.add_ignored();
          continue;
        }
        if (p == kIgnoreLabel) {
          throw InvalidArgumentError("prediction holds the ignore label at voxel " + std::to_string(v));
        }
        if (t >= classes || p >= classes) {
          throw InvalidArgumentError("label out of range at voxel " + std::to_string(v));
        }
        ++cm.at(t, p);
      }
    }
  });

  ConfusionMatrix out(classes);
  for (const ConfusionMatrix& cm : partial) out += cm;
  return out;
}

IouResult miou(const ConfusionMatrix& cm, std::size_t empty_class) {
  if (empty_class >= cm.class_count()) throw InvalidArgumentError("empty class out of range");
  IouResult r;
  r.per_class.resize(cm.class_count());
  std::vector<double> included;
  for (std::size_t c = 0; c < cm.class_count(); ++c) {
    const std::uint64_t tp = cm.true_positives(c);
    const std::uint64_t denom = tp + cm.false_positives(c) + cm.false_negatives(c);
    if (denom == 0) continue;
    r.per_class[c] = static_cast<double>(tp) / static_cast<double>(denom);
    if (c != empty_class) included.push_back(*r.per_class[c]);
  }
  if (included.empty()) {
    throw UndefinedMetricError("mIoU undefined: no non-empty class in prediction or truth");
  }
  // Summing in sorted order makes the result independent of class numbering.
  std::sort(included.begin(), included.end());
  double sum = 0.0;
  for (const double iou : included) sum += iou;
  r.classes_averaged = included.size();
  r.miou = sum / static_cast<double>(r.classes_averaged);
  return r;
}

double scene_completion_iou(const ConfusionMatrix& cm, std::size_t empty_class) {
  if (empty_class >= cm.class_count()) throw InvalidArgumentError("empty class out of range");
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t t = 0; t < cm.class_count(); ++t) {
    for (std::size_t p = 0; p < cm.class_count(); ++p) {
      const bool t_occ = t != empty_class;
      const bool p_occ = p != empty_class;
      if (t_occ && p_occ) tp += cm.at(t, p);
      else if (!t_occ && p_occ) fp += cm.at(t, p);
      else if (t_occ && !p_occ) fn += cm.at(t, p);
    }
  }
  if (tp + fp + fn == 0) {
    throw UndefinedMetricError("scene completion IoU undefined: no occupied voxels");
  }
  return static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
}

}  // namespace gsocc
