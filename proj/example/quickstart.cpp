// Learn rules on a synthetic panel, score the next month and print the rule set.

#include "rulescreen/rulescreen.hpp"

#include <cstdio>

using namespace rulescreen;

int main() {
    auto spec = desk_scale_spec(1);
    spec.n_stocks = 200;
    const auto data = generate(spec);

    // every label resolved by the end of 2013
    const Date cutoff(2013, 12, 20);
    std::vector<RawObservation> train;
    for (const auto& o : data.panel.observations)
        if (o.y && add_business_days(o.date, spec.horizon_days) <= cutoff)
            train.push_back(o);

    const Model model = learn_model(train, data.panel.specs, ModelConfig{}, cutoff);
    std::printf("%zu rules, dead zone %.4f\n", model.rules.size(), model.state.epsilon);
    for (std::size_t i = 0; i < model.rules.size(); ++i)
        std::printf("  w=%.3f  %s\n", model.state.weights[i],
                    describe(model.rules.rules[i], model.discretizer.specs, model.discretizer.cardinalities()).c_str());

    int counts[3] = {0, 0, 0};
    for (const auto& o : data.panel.observations)
        if (o.date > cutoff && o.date <= Date(2014, 1, 31))
            if (auto y = model.predict_raw(o.features))
                ++counts[score(*y, model.state.epsilon) + 1];
    std::printf("January 2014 scores: %d negative, %d neutral, %d positive\n", counts[0], counts[1], counts[2]);
}
