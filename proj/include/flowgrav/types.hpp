#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace flowgrav {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error with a short machine-readable code; the CLI maps these to JSON on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

enum class Axis { Origin, Destination, OdPair };
enum class Transform { Log, Identity, Dummy };

const char* to_string(Axis axis);
const char* to_string(Transform t);
Transform transform_from_string(const std::string& s);

// n x m nonnegative flow counts; rows are destinations, columns are origins.
struct FlowMatrix {
  Matrix values;
  std::vector<std::string> dest_ids;
  std::vector<std::string> origin_ids;

  Index n() const { return static_cast<Index>(dest_ids.size()); }
  Index m() const { return static_cast<Index>(origin_ids.size()); }

  void validate() const;
};

// One named variable. Unit-axis tables store a length-n (or length-m) column;
// od_pair tables store an n x m matrix aligned with the flow matrix.
struct Covariate {
  std::string name;
  Transform transform = Transform::Identity;
  Matrix values;
};

struct CovariateTable {
  Axis axis = Axis::Destination;
  std::vector<std::string> ids;         // origin table: m origin ids; destination table: n dest ids; od_pair: dest ids
  std::vector<std::string> origin_ids;  // od_pair only
  std::vector<Covariate> columns;

  void validate() const;
  const Covariate* find(const std::string& name) const;
};

// Planar destination centroids (km grid).
struct Centroids {
  std::vector<std::string> ids;
  Matrix coords;  // n x 2

  Index n() const { return static_cast<Index>(ids.size()); }
  void validate() const;
};

namespace detail {
void check_unique_ids(const std::vector<std::string>& ids, const std::string& what);
}

}  // namespace flowgrav
