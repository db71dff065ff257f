# network model, case parsing and trace processing
