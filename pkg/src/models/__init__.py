# solvers: qp core, central opf, admm, privacy, adversary
