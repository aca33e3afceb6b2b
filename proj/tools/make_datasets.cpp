// Regenerates the synthetic trajectory files shipped under data/.
//
//   make_datasets [scenario_dir] [data_dir]

#include <iostream>

#include "crossing/calibration.hpp"
#include "crossing/config.hpp"

namespace fs = std::filesystem;
using namespace crossing;

int main(int argc, char** argv) {
  const fs::path scenarios = argc > 1 ? argv[1] : "scenarios";
  const fs::path data = argc > 2 ? argv[2] : "data";
  try {
    for (const std::string model : {"sfm", "mdp"}) {
      CalibrationContexts contexts;
      for (const std::string label : {"cross_first", "yield"}) {
        contexts[label] = load_scenario({scenarios / ("calib_" + model + "_" + label + ".cfg")});
      }
      const auto dataset = synthetic_dataset(contexts);
      write_text_file(data / (model + "_synthetic.csv"), trajectories_to_csv(dataset));
      std::cout << model << ": " << dataset.sample_count() << " samples\n";
    }
    TrajectoryDataset reference;
    reference.trajectories.push_back(
        record_trajectory(load_scenario({scenarios / "scenario1.cfg"}), "scenario1", "cross_first"));
    write_text_file(data / "scenario1_reference.csv", trajectories_to_csv(reference));
    std::cout << "scenario1: " << reference.sample_count() << " samples\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
