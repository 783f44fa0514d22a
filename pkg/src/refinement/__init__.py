# Shape refinement package
