#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "occsim/occupancy.hpp"

namespace occsim {

/// N x D feature matrix, one sample per row.
using Features = Eigen::MatrixXd;

struct IouReport {
  std::map<Label, double> per_class;  ///< classes with a non-empty union only
  double mean = 1.0;                  ///< 1 when no class is present in either input
};

/// IoU over flat label arrays for the given classes.
IouReport miou(std::span<const Label> a, std::span<const Label> b, const std::vector<Label>& classes);

/// Grid mIoU. Without `classes`, every label present in either grid except
/// unassigned is evaluated.
IouReport miou(const OccupancyGrid& a, const OccupancyGrid& b,
               const std::optional<std::vector<Label>>& classes = std::nullopt);

/// 1 - mean pairwise mIoU over the N grids of one timestep.
double pairwise_diversity(const std::vector<OccupancyGrid>& grids,
                          const std::optional<std::vector<Label>>& classes = std::nullopt);

struct DiversityReport {
  std::vector<double> per_step;
  double mean = 0.0;
};

/// rollouts[n][t]: N rollouts of equal length.
DiversityReport rollout_diversity(const std::vector<std::vector<OccupancyGrid>>& rollouts,
                                  const std::optional<std::vector<Label>>& classes = std::nullopt);

/// exp of the von Neumann entropy of the normalized cosine kernel (1 + x.y) / 2.
double vendi(const Features& x);

struct Kernel {
  enum class Type { gaussian, polynomial } type = Type::gaussian;
  double sigma = 1.0;  ///< gaussian bandwidth
  int degree = 3;      ///< polynomial: (x.y / D + coef)^degree
  double coef = 1.0;

  static Kernel gaussian(double sigma) { return {Type::gaussian, sigma, 3, 1.0}; }
  static Kernel polynomial(int degree, double coef) { return {Type::polynomial, 1.0, degree, coef}; }
  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b) const;
};

/// Unbiased MMD^2. With equal sample counts the cross term also skips the
/// diagonal, so mmd2(x, x) is exactly zero.
double mmd2(const Features& x, const Features& y, const Kernel& k);

/// mmd2 with the cubic polynomial kernel (x.y / D + 1)^3.
double kid(const Features& x, const Features& y);

struct FidResult {
  double value = 0.0;
  bool floored = false;  ///< a covariance eigenvalue was raised to 1e-10
};

FidResult fid(const Features& x, const Features& y);

/// Feature files: "OCCF", u32 version, u64 N, u64 D, f32 row-major payload.
void write_features(const Features& x, const std::filesystem::path& path);
Features read_features(const std::filesystem::path& path);

}  // namespace occsim
