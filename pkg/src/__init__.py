# dpopf: private distributed dc opf via consensus admm
