#include <iostream>

#include "CLI11.hpp"
#include "suft/errors.hpp"
#include "suft/toy.hpp"

int main(int argc, char** argv) {
    CLI::App app{"suft-make-toy: generate a synthetic RGB-D toy dataset"};
    suft::ToySpec spec;
    std::string out_dir = "toy";
    app.add_option("--out-dir", out_dir, "directory to write images + manifest into");
    app.add_option("--count", spec.count, "number of samples");
    app.add_option("--size", spec.size, "square image size in pixels");
    app.add_option("--seed", spec.seed, "generator seed");
    app.add_option("--split", spec.split, "manifest split (train or test)");
    app.add_option("--d-max", spec.d_max, "manifest normalization ceiling");
    app.add_option("--unit-to-cm", spec.unit_to_cm, "unit multiplier for the records");
    app.add_flag("--holes", spec.holes, "punch invalid-pixel holes into the depth maps");
    CLI11_PARSE(app, argc, argv);

    try {
        const std::string manifest = suft::make_toy_dataset(out_dir, spec);
        std::cout << manifest << "\n";
    } catch (const suft::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
