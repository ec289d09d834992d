#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace tricir {

enum class Modality { Code, Text, Image };

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Code: return "code";
    case Modality::Text: return "text";
    case Modality::Image: return "image";
  }
  return "?";
}

inline Modality modality_from_name(const std::string& s) {
  if (s == "code") return Modality::Code;
  if (s == "text") return Modality::Text;
  if (s == "image") return Modality::Image;
  throw std::invalid_argument("unknown modality: " + s);
}

// Unit-norm vector in the shared space, tagged with modality and sample id.
struct Embedding {
  std::string id;
  Modality modality = Modality::Code;
  Eigen::RowVectorXf vec;
};

}  // namespace tricir
